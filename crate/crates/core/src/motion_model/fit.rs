//! Weighted L1 fitting of space-time motion models by iteratively reweighted
//! least squares.
//!
//! The flow predicted at frame `t` is `Σ_l B_l(t) · θ_l · m(x, y)` with
//! `m = [1, x, y, x², xy, y²]`, so the u and v components decouple into two
//! independent linear problems of `6L` unknowns each. The normal matrix is
//! assembled per frame as `Σ_t (B_t B_tᵀ) ⊗ M_t` with `M_t = Σ_i w_ti m_i m_iᵀ`,
//! which keeps the cost linear in the number of sites.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::basis::{PolyTimeBasis, SplineBasis, TemporalBasis};
use super::model::{blend, PolyTimeMotionModel, SplineMotionModel};
use super::{dot6, monomials, ModelError, QuadraticParams};
use crate::flow_io::{axis_coords, FlowVolume};

/// Pivot ratio below which a Cholesky factor is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Smoothing of `|r|` as `sqrt(r² + ε²)`.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once the relative change of the smoothed objective falls below this.
    pub relative_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { epsilon: 1e-6, max_iterations: 50, relative_tolerance: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub controls: Vec<QuadraticParams>,
    /// Some normal-equation solve was rank deficient and resolved by minimum norm.
    pub singular: bool,
    pub iterations: usize,
    /// Weighted L1 objective `Σ w · ‖f − f̃‖₁` of the returned controls.
    pub objective: f64,
    /// Smoothed objective at each IRLS iterate.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    pub model: SplineMotionModel,
    pub singular: bool,
    pub iterations: usize,
    pub objective: f64,
    pub trace: Vec<f64>,
}

/// Controls minimizing `Σ_{i,t} w(i,t) · ‖f(i,t) − f̃(i,t)‖₁` for a spline model.
///
/// `weights` is indexed `t · |Ω| + i` and already carries any per-frame normalization.
pub fn fit_spline_model(
    volume: &FlowVolume,
    weights: &[f64],
    basis: &SplineBasis,
    init: Option<&SplineMotionModel>,
) -> Result<SplineFit, ModelError> {
    let out = fit_space_time(volume, weights, basis, init.map(|m| m.controls()), &FitOptions::default())?;
    let model = SplineMotionModel::new(basis.clone(), out.controls)?;
    Ok(SplineFit {
        model,
        singular: out.singular,
        iterations: out.iterations,
        objective: out.objective,
        trace: out.trace,
    })
}

pub fn fit_polytime_model(
    volume: &FlowVolume,
    weights: &[f64],
    basis: &PolyTimeBasis,
    init: Option<&PolyTimeMotionModel>,
) -> Result<(PolyTimeMotionModel, FitOutcome), ModelError> {
    let out = fit_space_time(volume, weights, basis, init.map(|m| m.coefficients()), &FitOptions::default())?;
    let model = PolyTimeMotionModel::new(basis.clone(), out.controls.clone())?;
    Ok((model, out))
}

struct Problem<'a, B: TemporalBasis> {
    volume: &'a FlowVolume,
    basis: &'a B,
    mono: Vec<[f64; 6]>,
    sites: usize,
}

impl<B: TemporalBasis> Problem<'_, B> {
    fn dim(&self) -> usize {
        6 * self.basis.control_count()
    }

    /// Normal equations of the weighted least-squares problem for one component.
    fn assemble<'v>(&self, values: impl Fn(usize) -> &'v [f32], weights: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let dim = self.dim();
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for t in 0..self.basis.frame_count() {
            let vals = values(t);
            let w = &weights[t * self.sites..(t + 1) * self.sites];
            let mut m = [[0.0f64; 6]; 6];
            let mut c = [0.0f64; 6];
            for i in 0..self.sites {
                let wi = w[i];
                if wi == 0.0 {
                    continue;
                }
                let mi = &self.mono[i];
                let val = vals[i] as f64;
                for r in 0..6 {
                    let wr = wi * mi[r];
                    c[r] += wr * val;
                    for s in r..6 {
                        m[r][s] += wr * mi[s];
                    }
                }
            }
            for r in 0..6 {
                for s in 0..r {
                    m[r][s] = m[s][r];
                }
            }
            let bw = self.basis.frame_weights(t);
            let nz: Vec<(usize, f64)> = bw.iter().copied().enumerate().filter(|&(_, b)| b != 0.0).collect();
            for &(p, bp) in &nz {
                for r in 0..6 {
                    rhs[p * 6 + r] += bp * c[r];
                }
                for &(q, bq) in &nz {
                    let bb = bp * bq;
                    for r in 0..6 {
                        for s in 0..6 {
                            a[(p * 6 + r, q * 6 + s)] += bb * m[r][s];
                        }
                    }
                }
            }
        }
        (a, rhs)
    }

    fn solve_component<'v>(&self, values: impl Fn(usize) -> &'v [f32], weights: &[f64]) -> (Vec<[f64; 6]>, bool) {
        let (a, rhs) = self.assemble(values, weights);
        let (x, singular) = solve_psd(a, rhs);
        let coeffs = (0..self.basis.control_count())
            .map(|p| std::array::from_fn(|r| x[p * 6 + r]))
            .collect();
        (coeffs, singular)
    }

    /// Residuals `(f − f̃)` for both components, indexed `t · |Ω| + i`.
    fn residuals(&self, controls: &[QuadraticParams]) -> (Vec<f64>, Vec<f64>) {
        let total = self.sites * self.basis.frame_count();
        let mut ru = Vec::with_capacity(total);
        let mut rv = Vec::with_capacity(total);
        for t in 0..self.basis.frame_count() {
            let p = blend(controls, self.basis.frame_weights(t));
            let (cu, cv) = (p.u_coeffs(), p.v_coeffs());
            let f = self.volume.frame(t);
            for i in 0..self.sites {
                let m = &self.mono[i];
                ru.push(f.u()[i] as f64 - dot6(&cu, m));
                rv.push(f.v()[i] as f64 - dot6(&cv, m));
            }
        }
        (ru, rv)
    }
}

/// Solves `A x = b` for symmetric positive semi-definite `A`, falling back to
/// the minimum-norm pseudo-inverse solution when `A` is rank deficient.
fn solve_psd(a: DMatrix<f64>, b: DVector<f64>) -> (DVector<f64>, bool) {
    if let Some(ch) = a.clone().cholesky() {
        let diag = ch.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d * d), hi.max(d * d)));
        if hi > 0.0 && lo / hi > RANK_TOLERANCE {
            return (ch.solve(&b), false);
        }
    }
    let eig = SymmetricEigen::new(a);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let cutoff = max * RANK_TOLERANCE;
    let mut x = DVector::<f64>::zeros(b.len());
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let v = eig.eigenvectors.column(j);
            x += v * (v.dot(&b) / lambda);
        }
    }
    (x, true)
}

/// Generic weighted L1 fit over any temporal basis.
pub fn fit_space_time<B: TemporalBasis>(
    volume: &FlowVolume,
    weights: &[f64],
    basis: &B,
    init: Option<&[QuadraticParams]>,
    options: &FitOptions,
) -> Result<FitOutcome, ModelError> {
    let frames = volume.len();
    let sites = volume.sites();
    if basis.frame_count() != frames {
        return Err(ModelError::FrameMismatch { basis: basis.frame_count(), volume: frames });
    }
    if weights.len() != frames * sites {
        return Err(ModelError::WeightShape { expected: frames * sites, found: weights.len() });
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(ModelError::BadWeight(i));
    }
    if let Some(init) = init {
        if init.len() != basis.control_count() {
            return Err(ModelError::ControlCount { expected: basis.control_count(), controls: init.len() });
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 1e-12 {
        return Err(ModelError::DegenerateSupport(total));
    }

    let xs = axis_coords(volume.width());
    let ys = axis_coords(volume.height());
    let mono = (0..sites).map(|i| monomials(xs[i % volume.width()], ys[i / volume.width()])).collect();
    let problem = Problem { volume, basis, mono, sites };
    let u_of = |t: usize| volume.frame(t).u();
    let v_of = |t: usize| volume.frame(t).v();

    // Assembly works on max-normalized weights; the solution is unchanged.
    let scale = weights.iter().fold(0.0f64, |m, &w| m.max(w));
    let base: Vec<f64> = weights.iter().map(|w| w / scale).collect();

    let mut singular = false;
    let mut controls: Vec<QuadraticParams> = match init {
        Some(c) => c.to_vec(),
        None => {
            let (cu, su) = problem.solve_component(u_of, &base);
            let (cv, sv) = problem.solve_component(v_of, &base);
            singular |= su || sv;
            cu.into_iter().zip(cv).map(|(u, v)| QuadraticParams::from_components(u, v)).collect()
        }
    };

    let eps = options.epsilon;
    let mut trace = Vec::new();
    let mut best = (f64::INFINITY, controls.clone());
    let mut iterations = 0;
    loop {
        let (ru, rv) = problem.residuals(&controls);
        let mut smooth = 0.0;
        let mut l1 = 0.0;
        for ((w, a), b) in weights.iter().zip(&ru).zip(&rv) {
            smooth += w * ((a * a + eps * eps).sqrt() + (b * b + eps * eps).sqrt());
            l1 += w * (a.abs() + b.abs());
        }
        if l1 < best.0 || best.0.is_infinite() {
            best = (l1, controls.clone());
        }
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| (prev - smooth).abs() <= options.relative_tolerance * smooth.max(f64::MIN_POSITIVE));
        trace.push(smooth);
        if converged || iterations >= options.max_iterations {
            break;
        }
        iterations += 1;
        let wu: Vec<f64> = base.iter().zip(&ru).map(|(w, r)| w / (r * r + eps * eps).sqrt()).collect();
        let wv: Vec<f64> = base.iter().zip(&rv).map(|(w, r)| w / (r * r + eps * eps).sqrt()).collect();
        let wmax = wu.iter().chain(&wv).fold(0.0f64, |m, &w| m.max(w));
        let wu: Vec<f64> = wu.iter().map(|w| w / wmax).collect();
        let wv: Vec<f64> = wv.iter().map(|w| w / wmax).collect();
        let (cu, su) = problem.solve_component(u_of, &wu);
        let (cv, sv) = problem.solve_component(v_of, &wv);
        singular |= su || sv;
        controls = cu.into_iter().zip(cv).map(|(u, v)| QuadraticParams::from_components(u, v)).collect();
    }

    Ok(FitOutcome { controls: best.1, singular, iterations, objective: best.0, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_io::FlowField;
    use crate::motion_model::{build_basis, eval_spline_flow};

    fn volume_from_model(model: &SplineMotionModel, w: usize, h: usize, frames: usize) -> FlowVolume {
        let xs = axis_coords(w);
        let ys = axis_coords(h);
        let fr = (1..=frames)
            .map(|t| {
                FlowField::from_fn(w, h, |x, y| {
                    let (u, v) = eval_spline_flow(model, xs[x], ys[y], t);
                    (u as f32, v as f32)
                })
            })
            .collect();
        FlowVolume::new(fr).unwrap()
    }

    fn varied_model(basis: SplineBasis) -> SplineMotionModel {
        let controls = (0..basis.len())
            .map(|l| QuadraticParams(std::array::from_fn(|j| ((l * 7 + j * 5) % 11) as f64 / 5.0 - 1.0)))
            .collect();
        SplineMotionModel::new(basis, controls).unwrap()
    }

    #[test]
    fn recovers_generating_model() {
        let basis = build_basis(9, 3, 3);
        let truth = varied_model(basis.clone());
        let vol = volume_from_model(&truth, 12, 10, 9);
        let weights = vec![1.0; vol.len() * vol.sites()];
        let fit = fit_spline_model(&vol, &weights, &basis, None).unwrap();
        assert!(!fit.singular);
        let xs = axis_coords(12);
        let ys = axis_coords(10);
        for t in 1..=9 {
            for (y, &yy) in ys.iter().enumerate() {
                for (x, &xx) in xs.iter().enumerate() {
                    let (u, v) = eval_spline_flow(&fit.model, xx, yy, t);
                    let (a, b) = vol.frame(t - 1).get(x, y);
                    assert!((u - a as f64).hypot(v - b as f64) <= 1e-4);
                }
            }
        }
    }

    #[test]
    fn constant_flow_is_pure_translation() {
        let vol = FlowVolume::new(vec![FlowField::constant(8, 6, 3.0, -1.0); 9]).unwrap();
        for basis in [build_basis(9, 3, 3), build_basis(9, 1, 3), build_basis(9, 2, 2)] {
            let weights = vec![0.5; vol.len() * vol.sites()];
            let fit = fit_spline_model(&vol, &weights, &basis, None).unwrap();
            for c in fit.model.controls() {
                let expect = QuadraticParams::translation(3.0, -1.0);
                for (a, e) in c.0.iter().zip(expect.0) {
                    assert!((a - e).abs() < 1e-9, "{c:?}");
                }
            }
        }
    }

    #[test]
    fn zero_weights_are_degenerate() {
        let vol = FlowVolume::new(vec![FlowField::zeros(4, 4); 3]).unwrap();
        let basis = build_basis(3, 3, 3);
        let err = fit_spline_model(&vol, &[0.0; 48], &basis, None).unwrap_err();
        assert_eq!(err, ModelError::DegenerateSupport(0.0));
    }

    #[test]
    fn bad_weight_shapes_rejected() {
        let vol = FlowVolume::new(vec![FlowField::zeros(4, 4); 3]).unwrap();
        let basis = build_basis(3, 3, 3);
        assert!(matches!(fit_spline_model(&vol, &[1.0; 47], &basis, None), Err(ModelError::WeightShape { .. })));
        let mut w = vec![1.0; 48];
        w[3] = -1.0;
        assert_eq!(fit_spline_model(&vol, &w, &basis, None).unwrap_err(), ModelError::BadWeight(3));
        assert!(matches!(
            fit_spline_model(&vol, &[1.0; 48], &build_basis(4, 3, 3), None),
            Err(ModelError::FrameMismatch { .. })
        ));
    }

    #[test]
    fn single_site_support_is_minimum_norm() {
        // All weight on one site of one frame: only the constant terms of the
        // active controls are pinned, the rest of the system is singular.
        let vol = FlowVolume::new(vec![FlowField::constant(5, 5, 2.0, 1.0); 3]).unwrap();
        let basis = build_basis(3, 3, 3);
        let mut w = vec![0.0; 75];
        w[12] = 1.0; // centre pixel of frame 1, where every monomial but 1 vanishes
        let fit = fit_spline_model(&vol, &w, &basis, None).unwrap();
        assert!(fit.singular);
        let c = fit.model.controls();
        assert!((c[0].0[0] - 2.0).abs() < 1e-9 && (c[0].0[3] - 1.0).abs() < 1e-9);
        let rest: f64 = c.iter().flat_map(|p| p.0).map(|x| x * x).sum::<f64>() - 5.0;
        assert!(rest.abs() < 1e-9, "minimum-norm leaves other coefficients at zero");
    }

    #[test]
    fn l1_fit_ignores_outliers() {
        let mut frames = vec![FlowField::constant(10, 10, 1.0, 2.0); 5];
        // 10% gross outliers.
        for t in 0..5 {
            let (u, v) = frames[t].components_mut();
            for i in (0..100).step_by(10) {
                u[i] = 40.0;
                v[i] = -30.0;
            }
        }
        let vol = FlowVolume::new(frames).unwrap();
        let basis = build_basis(5, 3, 3);
        let fit = fit_spline_model(&vol, &vec![1.0; 500], &basis, None).unwrap();
        let (u, v) = eval_spline_flow(&fit.model, 0.3, 0.3, 3);
        assert!((u - 1.0).abs() < 1e-3 && (v - 2.0).abs() < 1e-3, "{u} {v}");
    }

    #[test]
    fn smoothed_objective_non_increasing() {
        let basis = build_basis(9, 3, 3);
        let truth = varied_model(basis.clone());
        let mut vol = volume_from_model(&truth, 9, 9, 9);
        let mut state = 12345u64;
        for f in vol.frames_mut() {
            let (u, v) = f.components_mut();
            for x in u.iter_mut().chain(v.iter_mut()) {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *x += ((state >> 33) as f32 / (1u64 << 31) as f32 - 0.5) * 2.0;
            }
        }
        let weights: Vec<f64> = (0..vol.len() * vol.sites()).map(|i| 0.2 + (i % 7) as f64 / 7.0).collect();
        let out = fit_space_time(&vol, &weights, &basis, None, &FitOptions::default()).unwrap();
        assert!(out.trace.len() > 2);
        for pair in out.trace.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-9), "{:?}", out.trace);
        }
    }

    #[test]
    fn polytime_fit_recovers_quadratic_time() {
        let basis = PolyTimeBasis::new(7, 2);
        let coeffs: Vec<_> = (0..3)
            .map(|j| QuadraticParams(std::array::from_fn(|k| ((j * 3 + k) % 5) as f64 * 0.3 - 0.6)))
            .collect();
        let truth = PolyTimeMotionModel::new(basis.clone(), coeffs).unwrap();
        let xs = axis_coords(8);
        let ys = axis_coords(8);
        let frames = (0..7)
            .map(|t| {
                let p = truth.params_at_frame(t);
                FlowField::from_fn(8, 8, |x, y| {
                    let (u, v) = p.eval(xs[x], ys[y]);
                    (u as f32, v as f32)
                })
            })
            .collect();
        let vol = FlowVolume::new(frames).unwrap();
        let (model, out) = fit_polytime_model(&vol, &vec![1.0; 7 * 64], &basis, None).unwrap();
        assert!(out.objective < 1e-4);
        for (a, e) in model.coefficients().iter().zip(truth.coefficients()) {
            for (x, y) in a.0.iter().zip(e.0) {
                assert!((x - y).abs() < 1e-5);
            }
        }
    }
}
