use super::{Array, Dd, Graph, ParamStore, Scalar, Var};
use crate::error::{Error, Result};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input or parameter index, coordinate)` of the worst error.
    pub worst: (usize, usize),
    /// Analytic and numeric derivative at `worst`.
    pub worst_values: (f64, f64),
    pub coords_checked: usize,
}

impl GradCheckReport {
    fn new() -> Self {
        GradCheckReport { max_rel_error: 0.0, worst: (0, 0), worst_values: (0.0, 0.0), coords_checked: 0 }
    }

    fn record(&mut self, analytic: f64, numeric: f64, at: (usize, usize)) {
        let err = relative_error(analytic, numeric);
        self.coords_checked += 1;
        if err > self.max_rel_error {
            self.max_rel_error = err;
            self.worst = at;
            self.worst_values = (analytic, numeric);
        }
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn eval_scalar<F>(f: &F, point: &[Array<f64>], at: (usize, usize)) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = point.iter().map(|a| g.constant(a.clone())).collect();
    let root = f(&mut g, &vars)?;
    let v = g.value(root).item();
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("grad_check closure output at input {} coordinate {}", at.0, at.1)));
    }
    Ok(v)
}

/// Check the gradient of a scalar closure with respect to every coordinate
/// of every input array.
pub fn grad_check<F>(f: F, point: &[Array<f64>], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = point.iter().map(|a| g.leaf(a.clone())).collect();
    let root = f(&mut g, &vars)?;
    if !g.value(root).item().is_finite() {
        return Err(Error::NonFinite("grad_check closure output at the base point".into()));
    }
    let grads = g.backward(root)?;

    let mut report = GradCheckReport::new();
    let mut work: Vec<Array<f64>> = point.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var).cloned().unwrap_or_else(|| Array::zeros(point[i].shape().to_vec()));
        for j in 0..point[i].len() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + eps;
            let plus = eval_scalar(&f, &work, (i, j))?;
            work[i].data_mut()[j] = orig - eps;
            let minus = eval_scalar(&f, &work, (i, j))?;
            work[i].data_mut()[j] = orig;
            report.record(analytic.data()[j], (plus - minus) / (2.0 * eps), (i, j));
        }
    }
    Ok(report)
}

/// A scalar function of one or more parameter stores that can be evaluated
/// at any precision.
pub trait Objective {
    fn eval<T: Scalar>(&self, g: &mut Graph<T>, stores: &[&ParamStore<T>]) -> Result<Var>;
}

/// Check `f64` backpropagated gradients of `objective` against central
/// differences of every trainable parameter coordinate.
///
/// The differences are formed in double-double precision, so rounding noise
/// in the objective (around `1e-16 / eps` in plain `f64`) does not swamp
/// derivatives that are zero or tiny. `stride` > 1 checks every
/// `stride`-th coordinate of each tensor.
pub fn grad_check_params<O: Objective>(
    stores: &[&ParamStore<f64>],
    objective: &O,
    eps: f64,
    stride: usize,
) -> Result<GradCheckReport> {
    let mut g = Graph::new();
    let root = objective.eval(&mut g, stores)?;
    if !g.value(root).item().is_finite() {
        return Err(Error::NonFinite("grad_check objective at the base point".into()));
    }
    let grads = g.backward(root)?;
    drop(g);

    let mut wide: Vec<ParamStore<Dd>> = stores.iter().map(|s| s.cast()).collect();
    let stride = stride.max(1);
    let mut report = GradCheckReport::new();
    let mut flat = 0usize;
    for s in 0..stores.len() {
        for id in stores[s].ids() {
            let p = stores[s].get(id);
            if !p.trainable {
                flat += 1;
                continue;
            }
            let analytic = grads.param(p.key());
            for j in (0..p.value().len()).step_by(stride) {
                let orig = wide[s].get(id).value().data()[j];
                let mut at = |d: f64| -> Result<Dd> {
                    wide[s].get_mut(id).value_mut().data_mut()[j] = orig + Dd::of(d);
                    let views: Vec<&ParamStore<Dd>> = wide.iter().collect();
                    let mut g = Graph::new();
                    let r = objective.eval(&mut g, &views)?;
                    let v = g.value(r).item();
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "grad_check objective at parameter {} coordinate {j}",
                            p.name()
                        )));
                    }
                    Ok(v)
                };
                let numeric = (at(eps)? - at(-eps)?) / Dd::of(2.0 * eps);
                wide[s].get_mut(id).value_mut().data_mut()[j] = orig;
                let a = analytic.map_or(0.0, |g| g.data()[j]);
                report.record(a, numeric.to_f64(), (flat, j));
            }
            flat += 1;
        }
    }
    Ok(report)
}
