use indexmap::IndexMap;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer kinds whose parameters a [`ParameterStore`] can hold. The set is
/// closed: forward/backward passes exist only for these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Embedding { vocab_size: usize, dim: usize },
    Linear { input: usize, output: usize },
    LayerNorm { dim: usize },
    MultiHeadAttention { model_dim: usize, heads: usize },
    FeedForwardGelu { model_dim: usize, ff_dim: usize },
    SoftmaxHead { input: usize, output: usize },
    /// A linear layer whose weights start at zero, for output heads that
    /// should predict exactly uniformly before training.
    ZeroLinear { input: usize, output: usize },
}

/// A named layer with its dimensions; a list of these fully determines the
/// shape and initialization of a parameter store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::Config(format!(
                "layer spec \"{}\": {what}",
                self.name
            )))
        };
        match self.kind {
            LayerKind::Embedding { vocab_size, dim } => {
                if vocab_size == 0 || dim == 0 {
                    return bad("embedding dims must be positive");
                }
            }
            LayerKind::Linear { input, output }
            | LayerKind::SoftmaxHead { input, output }
            | LayerKind::ZeroLinear { input, output } => {
                if input == 0 || output == 0 {
                    return bad("linear dims must be positive");
                }
            }
            LayerKind::LayerNorm { dim } => {
                if dim == 0 {
                    return bad("layer_norm dim must be positive");
                }
            }
            LayerKind::MultiHeadAttention { model_dim, heads } => {
                if model_dim == 0 || heads == 0 {
                    return bad("attention dims must be positive");
                }
                if model_dim % heads != 0 {
                    return bad("model_dim not divisible by heads");
                }
            }
            LayerKind::FeedForwardGelu { model_dim, ff_dim } => {
                if model_dim == 0 || ff_dim == 0 {
                    return bad("feed_forward dims must be positive");
                }
            }
        }
        Ok(())
    }

    /// Parameters this spec contributes, in canonical order:
    /// (suffix, shape, init rule).
    fn params(&self) -> Vec<(&'static str, Vec<usize>, Init)> {
        match self.kind {
            LayerKind::Embedding { vocab_size, dim } => {
                vec![("weight", vec![vocab_size, dim], Init::Glorot(vocab_size, dim))]
            }
            LayerKind::Linear { input, output } | LayerKind::SoftmaxHead { input, output } => vec![
                ("w", vec![input, output], Init::Glorot(input, output)),
                ("b", vec![output], Init::Zero),
            ],
            LayerKind::ZeroLinear { input, output } => vec![
                ("w", vec![input, output], Init::Zero),
                ("b", vec![output], Init::Zero),
            ],
            LayerKind::LayerNorm { dim } => vec![
                ("gain", vec![dim], Init::One),
                ("shift", vec![dim], Init::Zero),
            ],
            // No key bias: a uniform shift of every key moves all scores in
            // a row by the same amount and softmax cancels it, so such a
            // parameter could never receive gradient.
            LayerKind::MultiHeadAttention { model_dim, .. } => {
                let d = model_dim;
                vec![
                    ("wq", vec![d, d], Init::Glorot(d, d)),
                    ("bq", vec![d], Init::Zero),
                    ("wk", vec![d, d], Init::Glorot(d, d)),
                    ("wv", vec![d, d], Init::Glorot(d, d)),
                    ("bv", vec![d], Init::Zero),
                    ("wo", vec![d, d], Init::Glorot(d, d)),
                    ("bo", vec![d], Init::Zero),
                ]
            }
            LayerKind::FeedForwardGelu { model_dim, ff_dim } => vec![
                ("w1", vec![model_dim, ff_dim], Init::Glorot(model_dim, ff_dim)),
                ("b1", vec![ff_dim], Init::Zero),
                ("w2", vec![ff_dim, model_dim], Init::Glorot(ff_dim, model_dim)),
                ("b2", vec![model_dim], Init::Zero),
            ],
        }
    }
}

enum Init {
    Glorot(usize, usize),
    Zero,
    One,
}

/// One named parameter tensor with its gradient slot.
#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

/// Ordered collection of trainable parameter tensors with paired gradient
/// slots. Iteration order is insertion order and insertion order is the
/// spec order, so optimizer updates and serialization are deterministic.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    entries: IndexMap<String, ParamEntry>,
    specs: Vec<LayerSpec>,
    pub rng_seed: u64,
    pub step_count: u64,
}

pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StoreFile {
    format_version: u32,
    rng_seed: u64,
    step_count: u64,
    specs: Vec<LayerSpec>,
    entries: Vec<StoredEntry>,
}

#[derive(Serialize, Deserialize)]
struct StoredEntry {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl ParameterStore {
    /// Builds a store from layer specs. Weight matrices draw from
    /// uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases and
    /// layer-norm shifts start at zero, layer-norm gains at one. The same
    /// (specs, seed) always reproduces bit-identical values.
    pub fn init(specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("no layer specs given".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = IndexMap::new();
        for spec in &specs {
            spec.validate()?;
            for (suffix, shape, init) in spec.params() {
                let name = format!("{}.{}", spec.name, suffix);
                let len: usize = shape.iter().product();
                let values = match init {
                    Init::Glorot(fan_in, fan_out) => {
                        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                        (0..len).map(|_| rng.random::<f64>() * 2.0 * a - a).collect()
                    }
                    Init::Zero => vec![0.0; len],
                    Init::One => vec![1.0; len],
                };
                let prev = entries.insert(
                    name.clone(),
                    ParamEntry {
                        shape,
                        values,
                        grads: vec![0.0; len],
                    },
                );
                if prev.is_some() {
                    return Err(Error::Config(format!("duplicate parameter name \"{name}\"")));
                }
            }
        }
        Ok(ParameterStore {
            entries,
            specs,
            rng_seed: seed,
            step_count: 0,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.entries.values().map(|e| e.values.len()).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &ParamEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn entry(&self, name: &str) -> Result<&ParamEntry> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::Argument(format!("unknown parameter \"{name}\"")))
    }

    pub(crate) fn entry_mut(&mut self, name: &str) -> Result<&mut ParamEntry> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::Argument(format!("unknown parameter \"{name}\"")))
    }

    pub(crate) fn entry_by_index_mut(&mut self, index: usize) -> (&str, &mut ParamEntry) {
        let (k, v) = self.entries.get_index_mut(index).expect("index in range");
        (k.as_str(), v)
    }

    pub(crate) fn iter_entries_mut(&mut self) -> impl Iterator<Item = (&str, &mut ParamEntry)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn values(&self, name: &str) -> &[f64] {
        &self.entry(name).expect("parameter exists").values
    }

    /// 1-D view of a parameter. Panics if the name is unknown or not 1-D.
    pub fn view1(&self, name: &str) -> ArrayView1<'_, f64> {
        let e = self.entry(name).expect("parameter exists");
        assert_eq!(e.shape.len(), 1, "{name} is not 1-D");
        ArrayView1::from_shape(e.shape[0], &e.values).expect("shape matches")
    }

    /// 2-D view of a parameter. Panics if the name is unknown or not 2-D.
    pub fn view2(&self, name: &str) -> ArrayView2<'_, f64> {
        let e = self.entry(name).expect("parameter exists");
        assert_eq!(e.shape.len(), 2, "{name} is not 2-D");
        ArrayView2::from_shape((e.shape[0], e.shape[1]), &e.values).expect("shape matches")
    }

    /// Accumulates a 1-D gradient contribution.
    pub fn add_grad1(&mut self, name: &str, grad: &Array1<f64>) {
        let e = self.entries.get_mut(name).expect("parameter exists");
        assert_eq!(e.grads.len(), grad.len(), "gradient shape for {name}");
        for (g, d) in e.grads.iter_mut().zip(grad.iter()) {
            *g += d;
        }
    }

    /// Accumulates a 2-D gradient contribution (logical row-major order).
    pub fn add_grad2(&mut self, name: &str, grad: &Array2<f64>) {
        let e = self.entries.get_mut(name).expect("parameter exists");
        assert_eq!(e.grads.len(), grad.len(), "gradient shape for {name}");
        for (g, d) in e.grads.iter_mut().zip(grad.iter()) {
            *g += d;
        }
    }

    /// Scales every gradient slot, e.g. to turn a summed batch gradient into
    /// a mean.
    pub fn scale_grads(&mut self, factor: f64) {
        for e in self.entries.values_mut() {
            for g in &mut e.grads {
                *g *= factor;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for e in self.entries.values_mut() {
            e.grads.fill(0.0);
        }
    }

    pub fn grad_global_norm(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|e| e.grads.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_values_finite(&self) -> bool {
        self.entries
            .values()
            .all(|e| e.values.iter().all(|v| v.is_finite()))
    }

    /// First parameter with a non-finite gradient, if any.
    pub fn find_nonfinite_grad(&self) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, e)| e.grads.iter().any(|g| !g.is_finite()))
            .map(|(k, _)| k.as_str())
    }

    pub fn to_json(&self) -> String {
        let file = StoreFile {
            format_version: STORE_FORMAT_VERSION,
            rng_seed: self.rng_seed,
            step_count: self.step_count,
            specs: self.specs.clone(),
            entries: self
                .entries
                .iter()
                .map(|(name, e)| StoredEntry {
                    name: name.clone(),
                    shape: e.shape.clone(),
                    values: e.values.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("store serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: StoreFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("parameter store: {e}")))?;
        if file.format_version != STORE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "parameter store: unsupported format version {}",
                file.format_version
            )));
        }
        // Rebuild from specs to get names/shapes, then overwrite values.
        let mut store = ParameterStore::init(file.specs, file.rng_seed)?;
        store.step_count = file.step_count;
        if file.entries.len() != store.entries.len() {
            return Err(Error::Format(
                "parameter store: entry count does not match specs".into(),
            ));
        }
        for stored in file.entries {
            let e = store.entries.get_mut(&stored.name).ok_or_else(|| {
                Error::Format(format!(
                    "parameter store: unexpected entry \"{}\"",
                    stored.name
                ))
            })?;
            if e.shape != stored.shape || e.values.len() != stored.values.len() {
                return Err(Error::Format(format!(
                    "parameter store: shape mismatch for \"{}\"",
                    stored.name
                )));
            }
            e.values = stored.values;
        }
        Ok(store)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_spec(name: &str, input: usize, output: usize) -> LayerSpec {
        LayerSpec::new(name, LayerKind::Linear { input, output })
    }

    #[test]
    fn init_is_bit_identical_for_same_seed_and_specs() {
        let specs = vec![linear_spec("l", 2, 2)];
        let a = ParameterStore::init(specs.clone(), 7).unwrap();
        let b = ParameterStore::init(specs, 7).unwrap();
        for ((na, ea), (nb, eb)) in a.entries().zip(b.entries()) {
            assert_eq!(na, nb);
            let bits_a: Vec<u64> = ea.values.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = eb.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn init_respects_glorot_bounds_and_zero_biases() {
        let store = ParameterStore::init(vec![linear_spec("l", 4, 4)], 3).unwrap();
        let a = (6.0f64 / 8.0).sqrt();
        for &w in &store.entry("l.w").unwrap().values {
            assert!(w > -a && w < a);
        }
        assert!(store.entry("l.b").unwrap().values.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn attention_dims_must_divide() {
        let specs = vec![LayerSpec::new(
            "attn",
            LayerKind::MultiHeadAttention {
                model_dim: 10,
                heads: 3,
            },
        )];
        let err = ParameterStore::init(specs, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("model_dim not divisible by heads"));
        assert!(msg.contains("attn"));
    }

    #[test]
    fn layer_norm_init_gain_one_shift_zero() {
        let store =
            ParameterStore::init(vec![LayerSpec::new("ln", LayerKind::LayerNorm { dim: 5 })], 0)
                .unwrap();
        assert!(store.values("ln.gain").iter().all(|&v| v == 1.0));
        assert!(store.values("ln.shift").iter().all(|&v| v == 0.0));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let specs = vec![
            LayerSpec::new("emb", LayerKind::Embedding { vocab_size: 11, dim: 6 }),
            linear_spec("head", 6, 1),
        ];
        let mut store = ParameterStore::init(specs, 42).unwrap();
        store.step_count = 17;
        let loaded = ParameterStore::from_json(&store.to_json()).unwrap();
        assert_eq!(loaded.step_count, 17);
        assert_eq!(loaded.rng_seed, 42);
        for ((na, ea), (nb, eb)) in store.entries().zip(loaded.entries()) {
            assert_eq!(na, nb);
            assert_eq!(ea.shape, eb.shape);
            let bits_a: Vec<u64> = ea.values.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = eb.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn values_match_shape_product() {
        let store = ParameterStore::init(
            vec![LayerSpec::new(
                "ff",
                LayerKind::FeedForwardGelu {
                    model_dim: 4,
                    ff_dim: 8,
                },
            )],
            0,
        )
        .unwrap();
        for (_, e) in store.entries() {
            let expect: usize = e.shape.iter().product();
            assert_eq!(e.values.len(), expect);
            assert_eq!(e.grads.len(), expect);
        }
    }
}
