//! Continuous-time LTI plant descriptions and Van Loan discretization.
//!
//! A plant is `ẋ = A x + G u + Γ v`, `z = H x + w`, with white-noise
//! intensities carried separately as diagonal vectors so the same plant can
//! be discretized under many candidate intensities. Discretization uses the
//! augmented-matrix-exponential construction, which is exact for the class
//! of systems handled here.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// How a sensor's continuous intensity maps to a discrete covariance.
///
/// An integrating sensor accumulates the signal over the sample interval, so
/// its discrete covariance is `diag(W)/Δt`; a non-integrating sensor samples
/// instantaneously and keeps `diag(W)` independent of `Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Integrating,
    NonIntegrating,
}

/// Continuous-time LTI model `ẋ = A x + G u + Γ v`, `z = H x + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel {
    /// State matrix (nx × nx), units 1/s.
    pub a: DMatrix<f64>,
    /// Control input matrix (nx × nu).
    pub g: DMatrix<f64>,
    /// Noise input matrix (nx × nw).
    pub gamma: DMatrix<f64>,
    /// Observation matrix (nz × nx).
    pub h: DMatrix<f64>,
    /// Measurement covariance mapping used by [`discretize`].
    pub sensor_kind: SensorKind,
}

impl ContinuousModel {
    /// Builds a model, checking mutual dimension consistency.
    pub fn new(
        a: DMatrix<f64>,
        g: DMatrix<f64>,
        gamma: DMatrix<f64>,
        h: DMatrix<f64>,
        sensor_kind: SensorKind,
    ) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "state matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let nx = a.nrows();
        if nx == 0 {
            return Err(Error::Dimension("state dimension must be >= 1".into()));
        }
        for (name, rows, cols) in [
            ("control matrix", g.nrows(), g.ncols()),
            ("noise matrix", gamma.nrows(), gamma.ncols()),
        ] {
            if rows != nx || cols == 0 {
                return Err(Error::Dimension(format!(
                    "{name} must be {nx}xK with K >= 1, got {rows}x{cols}"
                )));
            }
        }
        if h.ncols() != nx || h.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "observation matrix must be Kx{nx} with K >= 1, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        Ok(Self {
            a,
            g,
            gamma,
            h,
            sensor_kind,
        })
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.g.ncols()
    }

    pub fn nw(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn nz(&self) -> usize {
        self.h.nrows()
    }
}

/// Diagonal process (`V`) and measurement (`W`) noise intensities — the
/// parameter vector a tuner searches over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseIntensities {
    /// Process intensities, one per noise channel; each ≥ 0.
    pub v: DVector<f64>,
    /// Measurement intensities, one per sensor channel; each > 0.
    pub w: DVector<f64>,
}

impl NoiseIntensities {
    pub fn new(v: DVector<f64>, w: DVector<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidValue(
                "process intensities must be finite and >= 0".into(),
            ));
        }
        if w.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidValue(
                "measurement intensities must be finite and > 0".into(),
            ));
        }
        Ok(Self { v, w })
    }

    /// Convenience constructor from slices.
    pub fn from_slices(v: &[f64], w: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(v), DVector::from_row_slice(w))
    }

    /// Checks channel counts against the owning model.
    pub fn check_dims(&self, model: &ContinuousModel) -> Result<()> {
        if self.v.len() != model.nw() {
            return Err(Error::Dimension(format!(
                "expected {} process intensities, got {}",
                model.nw(),
                self.v.len()
            )));
        }
        if self.w.len() != model.nz() {
            return Err(Error::Dimension(format!(
                "expected {} measurement intensities, got {}",
                model.nz(),
                self.w.len()
            )));
        }
        Ok(())
    }
}

/// Discrete-time model `x_k = F x_{k-1} + B u_k + v_k`, `z_k = H x_k + w_k`
/// at a fixed sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub f: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// Process covariance, symmetric PSD.
    pub q: DMatrix<f64>,
    /// Measurement covariance, symmetric PD.
    pub r: DMatrix<f64>,
    /// Sample time in seconds.
    pub dt: f64,
}

impl DiscreteModel {
    /// Builds a model, validating `dt > 0`, `Q` symmetric PSD and `R` symmetric PD.
    pub fn new(
        f: DMatrix<f64>,
        b: DMatrix<f64>,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidValue(format!("dt must be > 0, got {dt}")));
        }
        let nx = f.nrows();
        if f.ncols() != nx || b.nrows() != nx || h.ncols() != nx {
            return Err(Error::Dimension("F/B/H dimensions inconsistent".into()));
        }
        if q.nrows() != nx || q.ncols() != nx {
            return Err(Error::Dimension("Q must be nx x nx".into()));
        }
        let nz = h.nrows();
        if r.nrows() != nz || r.ncols() != nz {
            return Err(Error::Dimension("R must be nz x nz".into()));
        }
        let q_scale = q.norm();
        if (&q - q.transpose()).norm() > 1e-12 * q_scale.max(1.0) {
            return Err(Error::InvalidValue("Q must be symmetric".into()));
        }
        let eigs = q.clone().symmetric_eigenvalues();
        if eigs.iter().any(|&l| l < -1e-10 * q_scale.max(1.0)) {
            return Err(Error::NotPositiveDefinite(
                "Q has a significantly negative eigenvalue".into(),
            ));
        }
        if nalgebra::Cholesky::new(r.clone()).is_none() {
            return Err(Error::NotPositiveDefinite(
                "R is not positive definite".into(),
            ));
        }
        Ok(Self { f, b, h, q, r, dt })
    }

    pub fn nx(&self) -> usize {
        self.f.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn nz(&self) -> usize {
        self.h.nrows()
    }
}

// Padé-13 scaling threshold from Higham's scaling-and-squaring analysis.
const PADE13_THETA: f64 = 5.371920351148152;

const PADE13_COEF: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential `e^M` by 13th-order Padé approximation with scaling
/// and squaring.
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidValue(
            "matrix exponential input must be finite".into(),
        ));
    }

    // L1 norm = max absolute column sum.
    let norm = (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings as i32);

    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let b = &PADE13_COEF;
    let m2 = &scaled * &scaled;
    let m4 = &m2 * &m2;
    let m6 = &m4 * &m2;

    let u_inner = &m6 * (b[13] * &m6 + b[11] * &m4 + b[9] * &m2)
        + b[7] * &m6
        + b[5] * &m4
        + b[3] * &m2
        + b[1] * &eye;
    let u = &scaled * u_inner;
    let v = &m6 * (b[12] * &m6 + b[10] * &m4 + b[8] * &m2)
        + b[6] * &m6
        + b[4] * &m4
        + b[2] * &m2
        + b[0] * &eye;

    // Padé approximant is (V - U)^-1 (V + U).
    let numer = &v + &u;
    let denom = &v - &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::InvalidValue("Padé denominator is singular".into()))?;

    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Discretizes a continuous model at sample time `dt` under the given
/// intensities, via the augmented matrix exponential:
///
/// - `F = e^{A·dt}` and `Q = ∫₀^dt e^{Am} Γ diag(V) Γᵀ e^{Aᵀm} dm` come from
///   exponentiating `[[-A, Γ diag(V) Γᵀ], [0, Aᵀ]]·dt`,
/// - `B = ∫₀^dt e^{Am} dm · G` comes from exponentiating `[[A, G], [0, 0]]·dt`,
/// - `R = diag(W)/dt` for integrating sensors, `diag(W)` otherwise.
pub fn discretize(
    cont: &ContinuousModel,
    noise: &NoiseIntensities,
    dt: f64,
) -> Result<DiscreteModel> {
    if !(dt > 0.0) {
        return Err(Error::InvalidValue(format!("dt must be > 0, got {dt}")));
    }
    noise.check_dims(cont)?;

    let nx = cont.nx();
    let nu = cont.nu();

    // Continuous process noise covariance Γ diag(V) Γᵀ.
    let qc = &cont.gamma * DMatrix::from_diagonal(&noise.v) * cont.gamma.transpose();

    // Van Loan block for F and Q.
    let mut aug = DMatrix::<f64>::zeros(2 * nx, 2 * nx);
    aug.view_mut((0, 0), (nx, nx)).copy_from(&(-&cont.a));
    aug.view_mut((0, nx), (nx, nx)).copy_from(&qc);
    aug.view_mut((nx, nx), (nx, nx))
        .copy_from(&cont.a.transpose());
    let exp_aug = matrix_exponential(&(aug * dt))?;
    let f = exp_aug.view((nx, nx), (nx, nx)).transpose().into_owned();
    let q = symmetrize(&(&f * exp_aug.view((0, nx), (nx, nx))));

    // Companion block for B.
    let mut aug_b = DMatrix::<f64>::zeros(nx + nu, nx + nu);
    aug_b.view_mut((0, 0), (nx, nx)).copy_from(&cont.a);
    aug_b.view_mut((0, nx), (nx, nu)).copy_from(&cont.g);
    let exp_b = matrix_exponential(&(aug_b * dt))?;
    let b = exp_b.view((0, nx), (nx, nu)).into_owned();

    let w_diag = DMatrix::from_diagonal(&noise.w);
    let r = match cont.sensor_kind {
        SensorKind::Integrating => w_diag / dt,
        SensorKind::NonIntegrating => w_diag,
    };

    DiscreteModel::new(f, b, cont.h.clone(), q, r, dt)
}

/// 1D tracking benchmark: position/velocity state, noise injected into the
/// acceleration, position observed by a non-integrating sensor.
pub fn tracking_1d() -> ContinuousModel {
    ContinuousModel::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        SensorKind::NonIntegrating,
    )
    .expect("benchmark dimensions are consistent")
}

/// 2D tracking benchmark: state `[x, y, ẋ, ẏ]`, independent acceleration
/// noise per axis, both positions observed.
pub fn tracking_2d() -> ContinuousModel {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0,
    ]);
    let g = DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 1.0, 1.0]);
    #[rustfmt::skip]
    let gamma = DMatrix::from_row_slice(4, 2, &[
        0.0, 0.0,
        0.0, 0.0,
        1.0, 0.0,
        0.0, 1.0,
    ]);
    #[rustfmt::skip]
    let h = DMatrix::from_row_slice(2, 4, &[
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
    ]);
    ContinuousModel::new(a, g, gamma, h, SensorKind::NonIntegrating)
        .expect("benchmark dimensions are consistent")
}

/// Closed-form discrete Q of the 1D tracking system, used as a test oracle
/// and by documentation examples: `V·[[dt³/3, dt²/2], [dt²/2, dt]]`.
pub fn tracking_1d_q_closed_form(v: f64, dt: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            v * dt.powi(3) / 3.0,
            v * dt * dt / 2.0,
            v * dt * dt / 2.0,
            v * dt,
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let m = DMatrix::<f64>::zeros(2, 2);
        let e = matrix_exponential(&m).unwrap();
        assert_eq!(e, DMatrix::identity(2, 2));
    }

    #[test]
    fn expm_nilpotent_truncates() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.0, 0.0]);
        let e = matrix_exponential(&m).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(max_abs_diff(&e, &expected) < 1e-15);
    }

    #[test]
    fn expm_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0]));
        let e = matrix_exponential(&m).unwrap();
        assert_relative_eq!(e[(0, 0)], 1f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(e[(1, 1)], 2f64.exp(), max_relative = 1e-12);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn expm_rejects_bad_input() {
        assert!(matrix_exponential(&DMatrix::zeros(2, 3)).is_err());
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = f64::NAN;
        assert!(matrix_exponential(&m).is_err());
    }

    #[test]
    fn expm_times_expm_of_negation_is_identity() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..40 {
            let n = rng.random_range(2..=5);
            let m: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let scale = 5.0 / m.norm().max(1e-9);
            let m = m * scale.min(1.0);
            let e = matrix_exponential(&m).unwrap();
            let e_inv = matrix_exponential(&(-&m)).unwrap();
            assert!(max_abs_diff(&(&e * &e_inv), &DMatrix::identity(n, n)) < 1e-8);
        }
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        // norm well above the Padé threshold
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 12.0, -12.0, 0.0]);
        let e = matrix_exponential(&m).unwrap();
        // rotation matrix: exp of a skew matrix with angle 12
        assert_relative_eq!(e[(0, 0)], 12f64.cos(), epsilon = 1e-10);
        assert_relative_eq!(e[(0, 1)], 12f64.sin(), epsilon = 1e-10);
    }

    #[test]
    fn tracking_1d_shape() {
        let m = tracking_1d();
        assert_eq!((m.nx(), m.nu(), m.nw(), m.nz()), (2, 1, 1, 1));
        assert_eq!(m.sensor_kind, SensorKind::NonIntegrating);
    }

    #[test]
    fn tracking_1d_discretization_matches_closed_form() {
        let m = tracking_1d();
        let noise = NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap();
        let d = discretize(&m, &noise, 0.1).unwrap();
        assert_relative_eq!(d.f[(0, 1)], 0.1, epsilon = 1e-14);
        assert_relative_eq!(d.q[(1, 1)], 0.1, epsilon = 1e-14);
        assert_relative_eq!(d.b[(0, 0)], 0.005, epsilon = 1e-14);
        assert_relative_eq!(d.b[(1, 0)], 0.1, epsilon = 1e-14);
    }

    #[test]
    fn tracking_1d_half_second_example() {
        let m = tracking_1d();
        let noise = NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap();
        let d = discretize(&m, &noise, 0.5).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0 / 24.0, 0.125, 0.125, 0.5]);
        assert!(max_abs_diff(&d.q, &expected) < 1e-12);
        assert_relative_eq!(d.r[(0, 0)], 0.1, epsilon = 1e-15);
    }

    /// Simpson's-rule quadrature of the Van Loan integrand, independent of
    /// the augmented-exponential path.
    fn quadrature_q(
        cont: &ContinuousModel,
        noise: &NoiseIntensities,
        dt: f64,
        panels: usize,
    ) -> DMatrix<f64> {
        let nx = cont.nx();
        let qc = &cont.gamma * DMatrix::from_diagonal(&noise.v) * cont.gamma.transpose();
        let integrand = |s: f64| {
            let e = matrix_exponential(&(&cont.a * s)).unwrap();
            &e * &qc * e.transpose()
        };
        let h = dt / panels as f64;
        let mut sum = integrand(0.0) + integrand(dt);
        for i in 1..panels {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += weight * integrand(i as f64 * h);
        }
        sum * (h / 3.0) * DMatrix::identity(nx, nx)
    }

    #[test]
    fn van_loan_q_matches_quadrature() {
        let m = tracking_1d();
        let noise = NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap();
        let d = discretize(&m, &noise, 0.5).unwrap();
        let q_ref = quadrature_q(&m, &noise, 0.5, 200);
        assert!(max_abs_diff(&d.q, &q_ref) < 1e-12);

        let m2 = tracking_2d();
        let noise2 = NoiseIntensities::from_slices(&[1.0, 2.0], &[0.2, 0.1]).unwrap();
        let d2 = discretize(&m2, &noise2, 0.3).unwrap();
        let q_ref2 = quadrature_q(&m2, &noise2, 0.3, 200);
        assert!(max_abs_diff(&d2.q, &q_ref2) < 1e-12);
    }

    #[test]
    fn van_loan_q_matches_closed_form_over_random_inputs() {
        let m = tracking_1d();
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..100 {
            let v = rng.random_range(0.01..10.0);
            let dt = rng.random_range(0.01..2.0);
            let noise = NoiseIntensities::from_slices(&[v], &[0.1]).unwrap();
            let d = discretize(&m, &noise, dt).unwrap();
            let expected = tracking_1d_q_closed_form(v, dt);
            assert!(
                max_abs_diff(&d.q, &expected) < 1e-10,
                "mismatch at v={v}, dt={dt}"
            );
        }
    }

    #[test]
    fn q_is_psd_and_linear_in_intensity() {
        let m = tracking_1d();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let v = rng.random_range(0.0..5.0);
            let c = rng.random_range(0.0..4.0);
            let dt = rng.random_range(0.01..2.0);
            let base = discretize(
                &m,
                &NoiseIntensities::from_slices(&[v], &[0.1]).unwrap(),
                dt,
            )
            .unwrap();
            let scaled = discretize(
                &m,
                &NoiseIntensities::from_slices(&[c * v], &[0.1]).unwrap(),
                dt,
            )
            .unwrap();
            assert!(max_abs_diff(&scaled.q, &(c * &base.q)) < 1e-10);
            let eigs = base.q.clone().symmetric_eigenvalues();
            assert!(eigs.iter().all(|&l| l >= -1e-10 * base.q.norm().max(1.0)));
        }
    }

    #[test]
    fn integrating_r_scales_inversely_with_dt() {
        let mut m = tracking_1d();
        m.sensor_kind = SensorKind::Integrating;
        let noise = NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap();
        let r1 = discretize(&m, &noise, 0.1).unwrap().r;
        let r2 = discretize(&m, &noise, 0.4).unwrap().r;
        assert_relative_eq!(r1[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(r1[(0, 0)] / r2[(0, 0)], 0.4 / 0.1, epsilon = 1e-12);
    }

    #[test]
    fn discretize_rejects_nonpositive_dt() {
        let m = tracking_1d();
        let noise = NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap();
        assert!(discretize(&m, &noise, 0.0).is_err());
        assert!(discretize(&m, &noise, -0.5).is_err());
    }

    #[test]
    fn tracking_2d_block_structure() {
        let m = tracking_2d();
        assert_eq!((m.nx(), m.nu(), m.nw(), m.nz()), (4, 1, 2, 2));
        let v0 = 1.0;
        let v1 = 2.0;
        let dt = 0.25;
        let noise = NoiseIntensities::from_slices(&[v0, v1], &[0.2, 0.1]).unwrap();
        let d = discretize(&m, &noise, dt).unwrap();
        assert_relative_eq!(d.f[(0, 2)], dt, epsilon = 1e-14);
        assert_relative_eq!(d.f[(1, 3)], dt, epsilon = 1e-14);
        assert_relative_eq!(d.q[(0, 0)], dt.powi(3) * v0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(d.q[(1, 1)], dt.powi(3) * v1 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(d.q[(2, 2)], dt * v0, epsilon = 1e-12);
        assert_relative_eq!(d.q[(3, 3)], dt * v1, epsilon = 1e-12);
        assert_relative_eq!(d.q[(0, 2)], dt * dt * v0 / 2.0, epsilon = 1e-12);
        assert_relative_eq!(d.q[(1, 3)], dt * dt * v1 / 2.0, epsilon = 1e-12);
        // cross-axis terms vanish
        assert!(d.q[(0, 1)].abs() < 1e-14 && d.q[(0, 3)].abs() < 1e-14);
        assert_relative_eq!(d.b[(0, 0)], 0.5 * dt * dt, epsilon = 1e-14);
        assert_relative_eq!(d.b[(2, 0)], dt, epsilon = 1e-14);
    }

    #[test]
    fn zero_intensity_gives_zero_q() {
        let m = tracking_2d();
        let noise = NoiseIntensities::from_slices(&[0.0, 0.0], &[0.2, 0.1]).unwrap();
        let d = discretize(&m, &noise, 0.5).unwrap();
        assert!(d.q.amax() < 1e-15);
    }

    #[test]
    fn noise_intensities_validation() {
        assert!(NoiseIntensities::from_slices(&[-1.0], &[0.1]).is_err());
        assert!(NoiseIntensities::from_slices(&[1.0], &[0.0]).is_err());
        assert!(NoiseIntensities::from_slices(&[0.0], &[0.1]).is_ok());
        let m = tracking_1d();
        let wrong = NoiseIntensities::from_slices(&[1.0, 2.0], &[0.1]).unwrap();
        assert!(wrong.check_dims(&m).is_err());
    }
}
