use super::param::ParamStore;
use super::tape::{Tape, Var};
use super::TensorError;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Central difference step.
    pub h: f64,
    pub tol: f64,
    /// Upper bound on checked entries per parameter; entries are strided evenly.
    pub max_entries: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            h: 1e-5,
            tol: 1e-4,
            max_entries: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamReport {
    pub name: String,
    pub checked: usize,
    /// max |g_analytic - g_fd| / max(1, |g_fd|)
    pub max_rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub tol: f64,
    pub params: Vec<ParamReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_error < self.tol)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamReport> {
        self.params.iter().filter(|p| p.max_rel_error >= self.tol)
    }

    pub fn worst(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }
}

/// Compares reverse-mode gradients of a scalar function with central finite differences.
///
/// `f` must be deterministic in the parameter values. The store's gradients are
/// overwritten with the analytic gradient; values are restored on return.
pub fn grad_check<F>(
    f: F,
    store: &mut ParamStore<f64>,
    cfg: GradCheckConfig,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&Tape<f64>, &ParamStore<f64>) -> Result<Var, TensorError>,
{
    store.zero_grad();
    let tape = Tape::new();
    let loss = f(&tape, store)?;
    tape.backward(loss, store)?;
    drop(tape);

    let eval = |store: &ParamStore<f64>| -> Result<f64, TensorError> {
        let tape = Tape::inference();
        let loss = f(&tape, store)?;
        Ok(tape.value(loss).item())
    };

    let mut params = Vec::with_capacity(store.params().len());
    for id in store.ids().collect::<Vec<_>>() {
        let len = store.get(id).value.len();
        let picks: Vec<usize> = match cfg.max_entries {
            Some(m) if m < len => (0..m).map(|i| i * len / m).collect(),
            _ => (0..len).collect(),
        };
        let mut worst = 0.0f64;
        for &i in &picks {
            let orig = store.get(id).value.data()[i];
            store.get_mut(id).value.data_mut()[i] = orig + cfg.h;
            let up = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = orig - cfg.h;
            let down = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = orig;
            let fd = (up - down) / (2.0 * cfg.h);
            let analytic = store.get(id).grad.data()[i];
            let rel = (analytic - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
        }
        params.push(ParamReport {
            name: store.get(id).name.clone(),
            checked: picks.len(),
            max_rel_error: worst,
        });
    }
    Ok(GradCheckReport { tol: cfg.tol, params })
}
