//! Central finite-difference gradient checking.

use crate::nn::tensor::{GradBuffer, ParamId, ParamStore};

/// A scalar objective over one or more parameter stores.
pub trait Objective {
    fn stores(&self) -> Vec<&ParamStore>;
    fn store_mut(&mut self, index: usize) -> &mut ParamStore;
    /// Loss value only.
    fn loss(&self) -> f64;
    /// Loss and one gradient buffer per store (same order as [`Objective::stores`]).
    fn loss_and_grads(&self) -> (f64, Vec<GradBuffer>);
}

/// One scalar parameter to probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub store: usize,
    pub param: ParamId,
    pub index: usize,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(parameter name, max relative error)` per probed parameter tensor.
    pub per_param: Vec<(String, f64)>,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients against central differences with step `h`
/// at each probe and returns the worst relative error.
pub fn grad_check<O: Objective>(obj: &mut O, probes: &[Probe], h: f64) -> GradCheckReport {
    let (_, grads) = obj.loss_and_grads();
    check_against(obj, &grads, probes, h)
}

/// Same as [`grad_check`] but with externally supplied analytic gradients,
/// which lets the harness be checked on corrupted gradients.
pub fn check_against<O: Objective>(
    obj: &mut O,
    grads: &[GradBuffer],
    probes: &[Probe],
    h: f64,
) -> GradCheckReport {
    let mut report = GradCheckReport::default();
    for p in probes {
        let analytic = grads[p.store].get(p.param).map_or(0.0, |g| g[p.index]);
        let orig = obj.store_mut(p.store).get(p.param).values()[p.index];
        obj.store_mut(p.store).get_mut(p.param).values_mut()[p.index] = orig + h;
        let up = obj.loss();
        obj.store_mut(p.store).get_mut(p.param).values_mut()[p.index] = orig - h;
        let down = obj.loss();
        obj.store_mut(p.store).get_mut(p.param).values_mut()[p.index] = orig;
        let numeric = (up - down) / (2.0 * h);
        let err = relative_error(analytic, numeric);
        report.max_rel_error = report.max_rel_error.max(err);
        report.checked += 1;
        let name = obj.stores()[p.store].name(p.param).to_string();
        match report.per_param.iter_mut().find(|(n, _)| *n == name) {
            Some((_, e)) => *e = e.max(err),
            None => report.per_param.push((name, err)),
        }
    }
    report
}

/// Up to `per_param` evenly spaced probes inside every trainable tensor.
pub fn spread_probes(stores: &[&ParamStore], per_param: usize) -> Vec<Probe> {
    let mut probes = Vec::new();
    for (s, store) in stores.iter().enumerate() {
        for (id, _, t, trainable) in store.iter() {
            if !trainable {
                continue;
            }
            let n = t.len();
            let k = per_param.min(n).max(1);
            for j in 0..k {
                probes.push(Probe {
                    store: s,
                    param: id,
                    index: (j * n) / k + (n / k) / 2,
                });
            }
        }
    }
    probes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    /// loss = sum_i c_i * w_i
    struct Linear {
        store: ParamStore,
        w: ParamId,
        c: Vec<f64>,
    }

    impl Objective for Linear {
        fn stores(&self) -> Vec<&ParamStore> {
            vec![&self.store]
        }
        fn store_mut(&mut self, _: usize) -> &mut ParamStore {
            &mut self.store
        }
        fn loss(&self) -> f64 {
            self.store.value(self.w).iter().zip(&self.c).map(|(a, b)| a * b).sum()
        }
        fn loss_and_grads(&self) -> (f64, Vec<GradBuffer>) {
            let mut g = GradBuffer::for_store(&self.store);
            g.slot(self.w).copy_from_slice(&self.c);
            (self.loss(), vec![g])
        }
    }

    fn linear() -> Linear {
        let mut store = ParamStore::new();
        let w = store
            .add("w", Tensor::new(vec![4], vec![0.5, -1.0, 2.0, 0.25]).unwrap())
            .unwrap();
        Linear {
            store,
            w,
            c: vec![1.0, 2.0, -3.0, 0.5],
        }
    }

    #[test]
    fn linear_model_is_exact() {
        let mut m = linear();
        let probes = spread_probes(&m.stores(), 4);
        let r = grad_check(&mut m, &probes, 1e-5);
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_error < 1e-8, "{}", r.max_rel_error);
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let mut m = linear();
        let probes = spread_probes(&m.stores(), 4);
        let (_, mut grads) = m.loss_and_grads();
        grads[0].slot(m.w)[2] += 0.5;
        let r = check_against(&mut m, &grads, &probes, 1e-5);
        assert!(r.max_rel_error > 1e-4);
    }

    #[test]
    fn probing_restores_parameters() {
        let mut m = linear();
        let before = m.store.snapshot();
        let probes = spread_probes(&m.stores(), 4);
        grad_check(&mut m, &probes, 1e-3);
        assert_eq!(before, m.store.snapshot());
    }
}
