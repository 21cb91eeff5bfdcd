//! Liouville transport of densities and conservation of relative entropy.
//!
//! A density is written `u = w G^-1 rho(H)`. Since `G^-1 rho(H)` is
//! stationary, the ratio `w` is carried unchanged along trajectories, so
//! `u(x, y, t) = G^-1 rho(H) w0(phi_{-t}(x, y))`. Integrals of `u Psi(w)` are
//! evaluated by pulling every quadrature node back along the flow.
//!
//! Quadrature is tensor-product Gauss–Legendre in `(ln x, ln y)` over the
//! domain rectangle, where `dx dy / (xy) = d ln x d ln y`.

use std::fmt;
use std::sync::Arc;

use gauss_quad::GaussLegendre;

use crate::error::{invalid, LvError, Result};
use crate::exec::{map_slice, pairwise_sum, Execution};
use crate::model::{energy_excess_log, energy_gradient, hamiltonian, log_field, vector_field, ModelParams, PhaseState};
use crate::ode::{Control, Dopri5, Tolerances};
use crate::orbit::{log_extent, orbit_from_energy, DEFAULT_TOL};
use crate::stats::time_average;

pub type StateFn = Arc<dyn Fn(PhaseState) -> f64 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub const DEFAULT_QUADRATURE_N: usize = 64;

/// Weight `rho(h)` together with its derivative.
#[derive(Clone)]
pub struct Rho {
    label: String,
    f: ScalarFn,
    df: ScalarFn,
}

impl fmt::Debug for Rho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rho").field("label", &self.label).finish()
    }
}

impl Rho {
    pub fn unit() -> Self {
        Self::custom("1", |_| 1.0, |_| 0.0)
    }

    /// `exp(-h / theta)`.
    pub fn gibbs(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid(format!("theta must be positive, got {theta}")));
        }
        Ok(Self::custom(
            format!("exp(-h/{theta})"),
            move |h| (-h / theta).exp(),
            move |h| -(-h / theta).exp() / theta,
        ))
    }

    /// `h^k`.
    pub fn power(k: i32) -> Self {
        Self::custom(format!("h^{k}"), move |h| h.powi(k), move |h| k as f64 * h.powi(k - 1))
    }

    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), f: Arc::new(f), df: Arc::new(df) }
    }

    pub fn value(&self, h: f64) -> f64 {
        (self.f)(h)
    }

    pub fn derivative(&self, h: f64) -> f64 {
        (self.df)(h)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Entropy function applied to the density ratio.
#[derive(Clone)]
pub enum Psi {
    /// `ln z`
    Ln,
    /// `z ln z`
    ZLnZ,
    /// `1`
    One,
    Custom(ScalarFn),
}

impl fmt::Debug for Psi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psi::Ln => write!(f, "Ln"),
            Psi::ZLnZ => write!(f, "ZLnZ"),
            Psi::One => write!(f, "One"),
            Psi::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Psi {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Psi::Ln => z.ln(),
            Psi::ZLnZ => {
                if z == 0.0 {
                    0.0
                } else {
                    z * z.ln()
                }
            }
            Psi::One => 1.0,
            Psi::Custom(f) => f(z),
        }
    }
}

/// Integration domain: a rectangle in `(x, y)`, optionally intersected with
/// the sublevel set `H <= h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub sublevel: Option<f64>,
}

impl Domain {
    pub fn rectangle(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if !(x.0 > 0.0 && x.1 > x.0 && y.0 > 0.0 && y.1 > y.0) {
            return Err(invalid(format!("domain needs 0 < lo < hi, got x {x:?}, y {y:?}")));
        }
        Ok(Self { x, y, sublevel: None })
    }

    /// `{H <= h}` inside its bounding box, padded by 1% in log coordinates.
    pub fn sublevel_set(h: f64, params: ModelParams) -> Result<Self> {
        let [p0, p1, q0, q1] = log_extent(h, params)?;
        let (dp, dq) = (0.01 * (p1 - p0), 0.01 * (q1 - q0));
        Ok(Self {
            x: ((p0 - dp).exp(), (p1 + dp).exp()),
            y: ((q0 - dq).exp(), (q1 + dq).exp()),
            sublevel: Some(h),
        })
    }

    fn contains_log(&self, p: f64, q: f64) -> bool {
        let (x, y) = (p.exp(), q.exp());
        x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1
    }
}

#[derive(Clone)]
pub struct DensityField {
    /// Density ratio at `t = 0`.
    pub w0: StateFn,
    pub rho: Rho,
    pub domain: Domain,
    pub quadrature_n: usize,
}

impl fmt::Debug for DensityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityField")
            .field("rho", &self.rho)
            .field("domain", &self.domain)
            .field("quadrature_n", &self.quadrature_n)
            .finish()
    }
}

impl DensityField {
    pub fn new(w0: impl Fn(PhaseState) -> f64 + Send + Sync + 'static, rho: Rho, domain: Domain) -> Self {
        Self { w0: Arc::new(w0), rho, domain, quadrature_n: DEFAULT_QUADRATURE_N }
    }
}

/// `w0 = 1`.
pub fn uniform_ratio() -> StateFn {
    Arc::new(|_| 1.0)
}

/// Smooth bump `exp(1 - 1 / (1 - r^2))`, `r = |(ln x, ln y) - center| / radius`,
/// equal to 1 at the center and identically zero for `r >= 1`.
pub fn log_bump(center: PhaseState, radius: f64) -> StateFn {
    let [cp, cq] = center.log();
    Arc::new(move |s: PhaseState| {
        let [p, q] = s.log();
        let r2 = ((p - cp).powi(2) + (q - cq).powi(2)) / (radius * radius);
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - r2)).exp()
        }
    })
}

/// `div(F G^-1 rho(H))` by the product rule:
/// `w div F + rho'(H) G^-1 F.grad H - rho(H) G^-1 (f/x + g/y)`.
pub fn stationary_divergence(state: PhaseState, params: ModelParams, rho: &Rho) -> f64 {
    let (x, y) = (state.x(), state.y());
    let a = params.alpha();
    let h = hamiltonian(state, params);
    let (f, g) = vector_field(state, params);
    let (hx, hy) = energy_gradient(state, params);
    let inv_g = 1.0 / (x * y);
    let div_f = (1.0 - y) + a * (x - 1.0);
    let (r, dr) = (rho.value(h), rho.derivative(h));
    r * inv_g * div_f + dr * inv_g * (f * hx + g * hy) - r * inv_g * (f / x + g / y)
}

/// `div(F weight)` by central differences with relative step `step`.
pub fn stationary_divergence_numeric<W>(state: PhaseState, params: ModelParams, weight: W, step: f64) -> Result<f64>
where
    W: Fn(PhaseState) -> f64,
{
    let (x, y) = (state.x(), state.y());
    let (sx, sy) = (step * x, step * y);
    let flux = |x: f64, y: f64| -> Result<(f64, f64)> {
        let s = PhaseState::new(x, y)?;
        let (f, g) = vector_field(s, params);
        let w = weight(s);
        Ok((f * w, g * w))
    };
    let dfx = (flux(x + sx, y)?.0 - flux(x - sx, y)?.0) / (2.0 * sx);
    let dgy = (flux(x, y + sy)?.1 - flux(x, y - sy)?.1) / (2.0 * sy);
    Ok(dfx + dgy)
}

/// Result of one entropy quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub value: f64,
    pub nodes: usize,
    /// Nodes whose pre-image left the domain rectangle.
    pub leaked_nodes: usize,
}

/// Flow map for time `-t` in log coordinates.
fn pullback(solver: &Dopri5, alpha: f64, z: [f64; 2], t: f64) -> Result<[f64; 2]> {
    let back = move |_t: f64, z: &[f64; 2]| {
        let v = log_field(z, alpha);
        [-v[0], -v[1]]
    };
    Ok(solver.integrate(&back, 0.0, z, t, |_| Control::Continue)?.0)
}

/// Gauss–Legendre nodes and weights mapped to `[lo, hi]`.
fn rule(n: usize, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    let gl = GaussLegendre::new(n).map_err(|e| invalid(format!("quadrature order {n}: {e}")))?;
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    Ok(gl.as_node_weight_pairs().iter().map(|&(x, w)| (mid + half * x, half * w)).collect())
}

/// `int u(., t) Psi(w(., t)) dx dy` over the field's domain.
pub fn relative_entropy_at_time(
    field: &DensityField,
    params: ModelParams,
    t: f64,
    psi: &Psi,
    exec: Execution,
) -> Result<EntropyValue> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be nonnegative, got {t}")));
    }
    if field.quadrature_n < 2 {
        return Err(invalid("quadrature_n must be at least 2"));
    }
    let d = field.domain;
    let rp = rule(field.quadrature_n, d.x.0.ln(), d.x.1.ln())?;
    let rq = rule(field.quadrature_n, d.y.0.ln(), d.y.1.ln())?;
    let nodes: Vec<(f64, f64, f64)> = rp
        .iter()
        .flat_map(|&(p, wp)| rq.iter().map(move |&(q, wq)| (p, q, wp * wq)))
        .collect();
    let solver = Dopri5::new(Tolerances::from_tol(DEFAULT_TOL)?);
    let alpha = params.alpha();
    let excess_cap = d.sublevel.map(|h| h - params.h_min());

    let contributions = map_slice(exec, &nodes, |&(p, q, weight)| -> Result<(f64, bool)> {
        let excess = energy_excess_log(p, q, params);
        if excess_cap.is_some_and(|cap| excess > cap) {
            return Ok((0.0, false));
        }
        let pre = if t == 0.0 { [p, q] } else { pullback(&solver, alpha, [p, q], t)? };
        let leaked = !d.contains_log(pre[0], pre[1]);
        let w = (field.w0)(PhaseState::from_log(pre[0], pre[1]));
        if w == 0.0 {
            return Ok((0.0, leaked));
        }
        let h = params.h_min() + excess;
        Ok((weight * field.rho.value(h) * w * psi.eval(w), leaked))
    });

    let mut values = Vec::with_capacity(nodes.len());
    let mut leaked_nodes = 0;
    for c in contributions {
        let (v, leaked) = c?;
        values.push(v);
        leaked_nodes += leaked as usize;
    }
    if leaked_nodes > 0 {
        log::warn!("DomainLeak: {leaked_nodes} of {} pre-images left the domain at t = {t}", nodes.len());
    }
    Ok(EntropyValue { value: pairwise_sum(&values), nodes: nodes.len(), leaked_nodes })
}

/// `oint_{H = h} w0 Psi(w0) dt` over one period.
pub fn boltzmann_entropy_density(field: &DensityField, params: ModelParams, h: f64, psi: &Psi) -> Result<f64> {
    if !(h > params.h_min()) {
        return Err(LvError::EnergyBelowMinimum { h, h_min: params.h_min() });
    }
    let orbit = orbit_from_energy(h, params, DEFAULT_TOL)?;
    let avg = time_average(&orbit, |s| {
        let w = (field.w0)(s);
        if w == 0.0 {
            0.0
        } else {
            w * psi.eval(w)
        }
    })?;
    Ok(avg * orbit.period_tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(a: f64) -> ModelParams {
        ModelParams::new(a).unwrap()
    }

    fn s(x: f64, y: f64) -> PhaseState {
        PhaseState::new(x, y).unwrap()
    }

    #[test]
    fn divergence_examples() {
        assert!(stationary_divergence(s(2.0, 3.0), p(1.0), &Rho::unit()).abs() < 1e-10);
        assert!(stationary_divergence(s(0.7, 1.4), p(0.5), &Rho::gibbs(1.0).unwrap()).abs() < 1e-10);
        let weight_x = stationary_divergence_numeric(s(0.7, 1.4), p(0.5), |st| st.x(), 1e-5).unwrap();
        assert!(weight_x.abs() > 0.1, "{weight_x}");
    }

    #[test]
    fn numeric_divergence_cross_check() {
        let params = p(0.8);
        for rho in [Rho::unit(), Rho::gibbs(0.7).unwrap(), Rho::power(2)] {
            let st = s(1.3, 0.6);
            let w = |z: PhaseState| rho.value(hamiltonian(z, params)) / (z.x() * z.y());
            let num = stationary_divergence_numeric(st, params, w, 1e-5).unwrap();
            assert!(num.abs() < 1e-8, "{} {num}", rho.label());
        }
    }

    #[test]
    fn uniform_ratio_with_log_psi_is_zero() {
        let params = p(1.0);
        let field = DensityField::new(|_| 1.0, Rho::unit(), Domain::sublevel_set(2.61, params).unwrap());
        for t in [0.0, 1.0] {
            let v = relative_entropy_at_time(&field, params, t, &Psi::Ln, Execution::Parallel).unwrap();
            assert_eq!(v.value, 0.0);
        }
    }

    #[test]
    fn indicator_recovers_invariant_area() {
        let params = p(1.0);
        let mut field = DensityField::new(|_| 1.0, Rho::unit(), Domain::sublevel_set(2.61, params).unwrap());
        field.quadrature_n = 128;
        let v = relative_entropy_at_time(&field, params, 0.0, &Psi::One, Execution::Parallel).unwrap();
        let area = crate::eos::area_invariant(2.61, params, DEFAULT_TOL).unwrap();
        assert!((v.value / area - 1.0).abs() < 5e-3, "{} vs {area}", v.value);
    }

    #[test]
    fn boltzmann_examples() {
        let params = p(1.0);
        let rect = Domain::rectangle((0.1, 10.0), (0.1, 10.0)).unwrap();
        let one = DensityField::new(|_| 1.0, Rho::unit(), rect);
        let tau = boltzmann_entropy_density(&one, params, 2.01, &Psi::One).unwrap();
        assert!((tau / (2.0 * PI) - 1.0).abs() < 0.01);
        assert_eq!(boltzmann_entropy_density(&one, params, 2.5, &Psi::Ln).unwrap(), 0.0);
        let three = DensityField::new(|_| 3.0, Rho::unit(), rect);
        let t3 = boltzmann_entropy_density(&three, params, 2.5, &Psi::One).unwrap();
        let t1 = boltzmann_entropy_density(&one, params, 2.5, &Psi::One).unwrap();
        assert!((t3 / t1 - 3.0).abs() < 1e-10);
        assert!(boltzmann_entropy_density(&one, params, 2.0, &Psi::One).is_err());
    }

    #[test]
    fn bump_is_compact_and_peaked() {
        let b = log_bump(s(1.0, 1.0), 0.5);
        assert_eq!(b(s(1.0, 1.0)), 1.0);
        assert_eq!(b(s(2.0, 1.0)), 0.0);
        assert!(b(s(1.2, 1.0)) > 0.0);
    }

    #[test]
    fn leak_is_reported_on_a_non_invariant_box() {
        let params = p(1.0);
        let field = DensityField::new(|_| 1.0, Rho::unit(), Domain::rectangle((0.8, 1.6), (0.8, 1.6)).unwrap());
        let v = relative_entropy_at_time(&field, params, 1.0, &Psi::One, Execution::Sequential).unwrap();
        assert!(v.leaked_nodes > 0);
    }
}
