use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nncore::params::ParameterStore;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_coord: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Compares the gradients already accumulated in the store against central
/// finite differences of `loss_fn`. The relative error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
///
/// `sample` limits how many coordinates are perturbed (None checks all);
/// the subset is drawn deterministically from the store seed. `eps` must
/// lie in [1e-6, 1e-3].
pub fn grad_check<F>(
    store: &mut ParameterStore,
    mut loss_fn: F,
    eps: f64,
    sample: Option<usize>,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParameterStore) -> f64,
{
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::Argument(format!(
            "finite-difference step must lie in [1e-6, 1e-3], got {eps}"
        )));
    }

    // Flat coordinate space across entries, in store order.
    let sizes: Vec<usize> = store.entries().map(|(_, e)| e.values.len()).collect();
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::Argument("store has no parameters to check".into()));
    }

    let mut coords: Vec<usize> = match sample {
        Some(n) if n < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(store.rng_seed ^ 0x6772_6164);
            rand::seq::index::sample(&mut rng, total, n).into_vec()
        }
        _ => (0..total).collect(),
    };
    coords.sort_unstable();

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_coord: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };

    for flat in coords {
        // Locate (entry, offset) for this flat coordinate.
        let mut entry_idx = 0;
        let mut offset = flat;
        while offset >= sizes[entry_idx] {
            offset -= sizes[entry_idx];
            entry_idx += 1;
        }

        let (analytic, orig) = {
            let (_, e) = store.entry_by_index_mut(entry_idx);
            (e.grads[offset], e.values[offset])
        };

        store.entry_by_index_mut(entry_idx).1.values[offset] = orig + eps;
        let up = loss_fn(store);
        store.entry_by_index_mut(entry_idx).1.values[offset] = orig - eps;
        let down = loss_fn(store);
        store.entry_by_index_mut(entry_idx).1.values[offset] = orig;

        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        let rel = (analytic - numeric).abs() / denom;
        report.checked += 1;
        if rel > report.max_rel_error {
            let (name, _) = store.entry_by_index_mut(entry_idx);
            report.max_rel_error = rel;
            report.worst_param = name.to_string();
            report.worst_coord = offset;
            report.worst_analytic = analytic;
            report.worst_numeric = numeric;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::params::{LayerKind, LayerSpec};

    // Quadratic loss on a single linear layer: L = sum((w + b)^2) has
    // gradient 2 (w + b) for both w and b coordinates.
    fn quadratic_store() -> ParameterStore {
        ParameterStore::init(
            vec![LayerSpec::new("l", LayerKind::Linear { input: 3, output: 2 })],
            11,
        )
        .unwrap()
    }

    fn quadratic_loss(store: &ParameterStore) -> f64 {
        let w = store.values("l.w");
        let b = store.values("l.b");
        let mut loss = 0.0;
        for (i, &wi) in w.iter().enumerate() {
            let s = wi + b[i % 2];
            loss += s * s;
        }
        loss
    }

    #[test]
    fn correct_gradients_pass() {
        let mut store = quadratic_store();
        let w: Vec<f64> = store.values("l.w").to_vec();
        let b: Vec<f64> = store.values("l.b").to_vec();
        let mut gw = vec![0.0; w.len()];
        let mut gb = vec![0.0; b.len()];
        for (i, &wi) in w.iter().enumerate() {
            let s = 2.0 * (wi + b[i % 2]);
            gw[i] = s;
            gb[i % 2] += s;
        }
        store.entry_mut("l.w").unwrap().grads = gw;
        store.entry_mut("l.b").unwrap().grads = gb;
        let report = grad_check(&mut store, quadratic_loss, 1e-5, None).unwrap();
        assert_eq!(report.checked, 8);
        assert!(report.max_rel_error < 1e-8, "{report:?}");
    }

    #[test]
    fn wrong_gradient_is_caught_and_named() {
        let mut store = quadratic_store();
        // Deliberately wrong: all-zero gradients against a non-flat loss.
        let report = grad_check(&mut store, quadratic_loss, 1e-5, None).unwrap();
        assert!(report.max_rel_error > 0.1, "{report:?}");
        assert!(report.worst_param.starts_with("l."));
    }

    #[test]
    fn perturbations_are_restored() {
        let mut store = quadratic_store();
        let before: Vec<u64> = store.values("l.w").iter().map(|v| v.to_bits()).collect();
        grad_check(&mut store, quadratic_loss, 1e-4, Some(4)).unwrap();
        let after: Vec<u64> = store.values("l.w").iter().map(|v| v.to_bits()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn sampling_is_deterministic() {
        let run = || {
            let mut store = quadratic_store();
            grad_check(&mut store, quadratic_loss, 1e-5, Some(3)).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.checked, 3);
        assert_eq!(a.worst_param, b.worst_param);
        assert_eq!(a.max_rel_error.to_bits(), b.max_rel_error.to_bits());
    }

    #[test]
    fn eps_outside_range_is_rejected() {
        let mut store = quadratic_store();
        assert!(grad_check(&mut store, quadratic_loss, 1e-7, None).is_err());
        assert!(grad_check(&mut store, quadratic_loss, 1e-2, None).is_err());
    }
}
