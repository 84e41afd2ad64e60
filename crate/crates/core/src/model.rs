//! Constitutive functions, model state, energy and constraints.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{enclosed_volume, geometry_from_u, spectral_jet, GeometryBundle};
use crate::harmonics::{build_grid, Jet, QuadratureGrid, SpectralField};

/// A scalar function with its first three derivatives: `[f, f', f'', f''']`.
pub type Derivs = [f64; 4];

fn add(a: Derivs, b: Derivs) -> Derivs {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant.
#[derive(Clone, Debug)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = Self::end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = Self::end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip { x: x.to_vec(), y: y.to_vec(), d }
    }

    fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
        let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if d.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            d
        }
    }

    fn eval(&self, t: f64) -> f64 {
        hermite(&self.x, &self.y, &self.d, t)
    }
}

/// Cubic Hermite interpolation on nodes `x` with values `y` and slopes `d`;
/// the end cells extend past the table.
fn hermite(x: &[f64], y: &[f64], d: &[f64], t: f64) -> f64 {
    let n = x.len();
    let i = match x.partition_point(|&v| v <= t) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    let h = x[i + 1] - x[i];
    let s = (t - x[i]) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1]
}

/// Tabulated double-well potential.
///
/// `W` and `W'` are Hermite cubics through the tabulated values with the next
/// derivative as slope, `W''` is the monotone cubic through its samples and
/// `W'''` is a central difference of that interpolant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TabulatedPotential {
    pub phi: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    #[serde(rename = "W1")]
    pub w1: Vec<f64>,
    #[serde(rename = "W2")]
    pub w2: Vec<f64>,
    #[serde(skip)]
    pchip: Option<Pchip>,
}

impl TabulatedPotential {
    pub fn new(phi: Vec<f64>, w: Vec<f64>, w1: Vec<f64>, w2: Vec<f64>) -> Result<Self> {
        let mut t = TabulatedPotential { phi, w, w1, w2, pchip: None };
        t.prepare()?;
        Ok(t)
    }

    fn prepare(&mut self) -> Result<()> {
        let n = self.phi.len();
        if n < 4 || self.w.len() != n || self.w1.len() != n || self.w2.len() != n {
            return Err(Error::Config("tabulated potential needs >= 4 rows of equal length".into()));
        }
        if self.phi.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("tabulated phi must be strictly increasing".into()));
        }
        let all = self.phi.iter().chain(&self.w).chain(&self.w1).chain(&self.w2);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("tabulated potential has non-finite entries".into()));
        }
        self.pchip = Some(Pchip::new(&self.phi, &self.w2));
        Ok(())
    }

    fn eval(&self, t: f64) -> Derivs {
        let owned;
        let p = match &self.pchip {
            Some(p) => p,
            None => {
                owned = Pchip::new(&self.phi, &self.w2);
                &owned
            }
        };
        let h = 1e-5 * (1.0 + t.abs());
        [
            hermite(&self.phi, &self.w, &self.w1, t),
            hermite(&self.phi, &self.w1, &self.w2, t),
            p.eval(t),
            (p.eval(t + h) - p.eval(t - h)) / (2.0 * h),
        ]
    }
}

/// Phase-field potential `W`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `W = (a/4)(φ² − w²)²`.
    QuarticDoubleWell {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        well: f64,
    },
    Tabulated(TabulatedPotential),
}

fn one() -> f64 {
    1.0
}

impl Default for Potential {
    fn default() -> Self {
        Potential::QuarticDoubleWell { scale: 1.0, well: 1.0 }
    }
}

impl Potential {
    pub fn eval(&self, t: f64) -> Derivs {
        match self {
            Potential::QuarticDoubleWell { scale: a, well: w } => {
                let q = t * t - w * w;
                [0.25 * a * q * q, a * t * q, a * (3.0 * t * t - w * w), 6.0 * a * t]
            }
            Potential::Tabulated(tab) => tab.eval(t),
        }
    }
}

/// Modulus `c₀ + c₁ σ(φ/width)` with `σ(x) = (1 + tanh x)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Modulus {
    pub base: f64,
    pub jump: f64,
    pub width: f64,
}

impl Modulus {
    pub fn constant(base: f64) -> Self {
        Modulus { base, jump: 0.0, width: 1.0 }
    }

    pub fn eval(&self, t: f64) -> Derivs {
        let s = self.width;
        let th = (t / s).tanh();
        let sech2 = 1.0 - th * th;
        let c = 0.5 * self.jump;
        [
            self.base + c * (1.0 + th),
            c * sech2 / s,
            c * (-2.0 * th * sech2) / (s * s),
            c * (-2.0 * sech2 * (1.0 - 3.0 * th * th)) / (s * s * s),
        ]
    }

    pub fn infimum(&self) -> f64 {
        self.base + self.jump.min(0.0)
    }
}

/// Trivial-branch multipliers at a given `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrivialBranch {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
}

/// Constitutive data `W, B, E`, the interface parameter `ε` and pressure `p`.
#[derive(Clone, Debug)]
pub struct Constitutive {
    pub potential: Potential,
    pub bending: Modulus,
    pub gaussian: Modulus,
    pub epsilon: f64,
    pub pressure: f64,
}

impl Default for Constitutive {
    fn default() -> Self {
        Constitutive {
            potential: Potential::default(),
            bending: Modulus::constant(1.0),
            gaussian: Modulus::constant(0.0),
            epsilon: 0.01,
            pressure: 0.0,
        }
    }
}

impl Constitutive {
    pub fn w(&self, t: f64) -> Derivs {
        self.potential.eval(t)
    }

    pub fn b(&self, t: f64) -> Derivs {
        self.bending.eval(t)
    }

    pub fn e(&self, t: f64) -> Derivs {
        self.gaussian.eval(t)
    }

    /// `Ψ = W + B + E` and derivatives.
    pub fn psi(&self, lambda: f64) -> Derivs {
        add(add(self.w(lambda), self.b(lambda)), self.e(lambda))
    }

    pub fn has_constant_moduli(&self) -> bool {
        self.bending.jump == 0.0 && self.gaussian.jump == 0.0
    }

    pub fn trivial_multipliers(&self, lambda: f64) -> TrivialBranch {
        let w = self.w(lambda)[0];
        let mu = self.psi(lambda)[1];
        TrivialBranch { lambda, mu, gamma: w - lambda * mu - 0.5 * self.pressure }
    }

    /// Sampling window used for sign scans of `W''`.
    pub fn scan_window(&self) -> (f64, f64) {
        match &self.potential {
            Potential::QuarticDoubleWell { well, .. } => (-3.0 * well.abs(), 3.0 * well.abs()),
            Potential::Tabulated(t) => (t.phi[0], *t.phi.last().unwrap()),
        }
    }

    /// Zeros of `W''` located by sign scan and bisection.
    pub fn w2_zeros(&self) -> Vec<f64> {
        let (a, b) = self.scan_window();
        let f = |t: f64| self.w(t)[2];
        let n = 6000;
        let mut out = Vec::new();
        let mut x0 = a;
        let mut f0 = f(a);
        for i in 1..=n {
            let x1 = a + (b - a) * i as f64 / n as f64;
            let f1 = f(x1);
            if f0 == 0.0 {
                out.push(x0);
            } else if f0 * f1 < 0.0 {
                out.push(bisect(f, x0, x1, 1e-14));
            }
            x0 = x1;
            f0 = f1;
        }
        out
    }

    /// The spinodal interval `(m₁, m₂)` where `W'' < 0`.
    pub fn spinodal(&self) -> Result<(f64, f64)> {
        if let Potential::QuarticDoubleWell { scale, well } = self.potential {
            if scale > 0.0 {
                let m = well.abs() / 3f64.sqrt();
                return Ok((-m, m));
            }
        }
        match self.w2_zeros()[..] {
            [m1, m2] => Ok((m1, m2)),
            ref z => Err(Error::Config(format!("W'' must have exactly two zeros, found {}", z.len()))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.pressure >= 0.0 && self.pressure.is_finite()) {
            return Err(Error::Config(format!("pressure must be nonnegative, got {}", self.pressure)));
        }
        for (name, m) in [("B", &self.bending), ("E", &self.gaussian)] {
            if !(m.width > 0.0) || !m.base.is_finite() || !m.jump.is_finite() {
                return Err(Error::Config(format!("{name}: width must be positive and values finite")));
            }
        }
        if self.bending.infimum() < self.epsilon {
            return Err(Error::Config(format!("B must stay >= epsilon; inf B = {}", self.bending.infimum())));
        }
        match &self.potential {
            Potential::QuarticDoubleWell { scale, well } => {
                if !(*scale > 0.0) || *well == 0.0 || !well.is_finite() {
                    return Err(Error::Config("quartic_double_well needs scale > 0 and well != 0".into()));
                }
            }
            Potential::Tabulated(t) => {
                if t.w.iter().any(|&v| v < 0.0) {
                    return Err(Error::Config("tabulated W must be nonnegative".into()));
                }
            }
        }
        let (a, b) = self.scan_window();
        for i in 0..=600 {
            let t = a + (b - a) * i as f64 / 600.0;
            if self.b(t)[0] < self.epsilon {
                return Err(Error::Config(format!("B({t}) < epsilon")));
            }
        }
        let zeros = self.w2_zeros();
        if zeros.len() != 2 {
            return Err(Error::Config(format!("W'' must have exactly two zeros, found {}", zeros.len())));
        }
        Ok(())
    }
}

pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BendingConfig {
    #[serde(default = "one")]
    pub b0: f64,
    #[serde(default)]
    pub b1: f64,
    #[serde(default = "default_width")]
    pub width: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    #[serde(default)]
    pub e0: f64,
    #[serde(default)]
    pub e1: f64,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_width() -> f64 {
    0.1
}

impl Default for BendingConfig {
    fn default() -> Self {
        BendingConfig { b0: 1.0, b1: 0.0, width: default_width() }
    }
}

impl Default for GaussianConfig {
    fn default() -> Self {
        GaussianConfig { e0: 0.0, e1: 0.0, width: default_width() }
    }
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_l_max() -> usize {
    16
}

/// JSON model configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub pressure: f64,
    #[serde(rename = "W", default)]
    pub w: Potential,
    #[serde(rename = "B", default)]
    pub b: BendingConfig,
    #[serde(rename = "E", default)]
    pub e: GaussianConfig,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            epsilon: default_epsilon(),
            pressure: 0.0,
            w: Potential::default(),
            b: BendingConfig::default(),
            e: GaussianConfig::default(),
            l_max: default_l_max(),
        }
    }
}

impl ModelConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Validated constitutive data.
    pub fn constitutive(&self) -> Result<Constitutive> {
        let mut potential = self.w.clone();
        if let Potential::Tabulated(t) = &mut potential {
            t.prepare()?;
        }
        let c = Constitutive {
            potential,
            bending: Modulus { base: self.b.b0, jump: self.b.b1, width: self.b.width },
            gaussian: Modulus { base: self.e.e0, jump: self.e.e1, width: self.e.width },
            epsilon: self.epsilon,
            pressure: self.pressure,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Unknown `(φ, u, ζ, ξ)`: phase deviation, log-radius and shifted multipliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub phi: SpectralField,
    pub u: SpectralField,
    pub zeta: f64,
    pub xi: f64,
}

impl ModelState {
    pub fn trivial(l_max: usize) -> Self {
        ModelState { phi: SpectralField::zeros(l_max), u: SpectralField::zeros(l_max), zeta: 0.0, xi: 0.0 }
    }

    pub fn l_max(&self) -> usize {
        self.phi.l_max().max(self.u.l_max())
    }

    pub fn axpy(&self, a: f64, o: &ModelState) -> ModelState {
        ModelState {
            phi: self.phi.axpy(a, &o.phi),
            u: self.u.axpy(a, &o.u),
            zeta: self.zeta + a * o.zeta,
            xi: self.xi + a * o.xi,
        }
    }

    pub fn scaled(&self, a: f64) -> ModelState {
        ModelState { phi: self.phi.scaled(a), u: self.u.scaled(a), zeta: a * self.zeta, xi: a * self.xi }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.coeffs().iter().chain(self.u.coeffs()).all(|v| v.is_finite()) && self.zeta.is_finite() && self.xi.is_finite()
    }

    /// Euclidean norm of the `(φ, u)` coefficients in the orthonormal basis.
    pub fn field_norm(&self) -> f64 {
        let a: f64 = self.phi.to_normalized().iter().chain(&self.u.to_normalized()).map(|v| v * v).sum();
        a.sqrt()
    }
}

/// State file: a state together with its control parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub lambda: f64,
    pub phi: SpectralField,
    pub u: SpectralField,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default)]
    pub xi: f64,
}

impl StateFile {
    pub fn new(lambda: f64, s: &ModelState) -> Self {
        StateFile { lambda, phi: s.phi.clone(), u: s.u.clone(), zeta: s.zeta, xi: s.xi }
    }

    pub fn state(&self) -> ModelState {
        ModelState { phi: self.phi.clone(), u: self.u.clone(), zeta: self.zeta, xi: self.xi }
    }
}

/// Constitutive data bound to a quadrature grid.
#[derive(Clone, Debug)]
pub struct Model {
    pub constitutive: Constitutive,
    grid: Arc<QuadratureGrid>,
    pub(crate) corrupt_multiplier_sign: bool,
}

/// Geometry of a state plus the jet of its phase deviation.
pub(crate) struct Evaluated {
    pub geom: GeometryBundle,
    pub phi: Jet,
}

impl Model {
    pub fn new(constitutive: Constitutive, l_max: usize) -> Self {
        Model { constitutive, grid: build_grid(l_max), corrupt_multiplier_sign: false }
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        Ok(Model::new(cfg.constitutive()?, cfg.l_max))
    }

    /// Same grid, different constitutive data.
    pub fn with_constitutive(&self, constitutive: Constitutive) -> Self {
        Model { constitutive, ..self.clone() }
    }

    /// Same constitutive data on a grid of a different degree.
    pub fn with_l_max(&self, l_max: usize) -> Self {
        Model { grid: build_grid(l_max), ..self.clone() }
    }

    /// Copy whose shape residual carries a sign error in the `μ(λ+φ)` term.
    #[doc(hidden)]
    pub fn with_corrupted_multiplier_sign(&self) -> Self {
        Model { corrupt_multiplier_sign: true, ..self.clone() }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn l_max(&self) -> usize {
        self.grid.l_max()
    }

    pub fn psi(&self, lambda: f64) -> Derivs {
        self.constitutive.psi(lambda)
    }

    pub fn trivial_multipliers(&self, lambda: f64) -> TrivialBranch {
        self.constitutive.trivial_multipliers(lambda)
    }

    /// `(γ, μ)` reconstructed from `(ζ, ξ, λ)`.
    pub fn multipliers(&self, state: &ModelState, lambda: f64) -> (f64, f64) {
        let t = self.trivial_multipliers(lambda);
        (t.gamma + state.zeta, t.mu + state.xi)
    }

    pub fn geometry(&self, state: &ModelState) -> Result<GeometryBundle> {
        geometry_from_u(&state.u, &self.grid)
    }

    pub(crate) fn evaluate(&self, state: &ModelState) -> Result<Evaluated> {
        if !state.is_finite() {
            return Err(Error::Domain("state has non-finite coefficients".into()));
        }
        let geom = self.geometry(state)?;
        let phi = spectral_jet(&state.phi, &self.grid)?;
        Ok(Evaluated { geom, phi })
    }

    fn energy_parts(&self, ev: &Evaluated, lambda: f64) -> (f64, f64, f64) {
        let c = &self.constitutive;
        let n = self.grid.n_nodes();
        let mut dens = Vec::with_capacity(n);
        let mut phase = Vec::with_capacity(n);
        for (k, g) in ev.geom.nodes().iter().enumerate() {
            let f = ev.phi.at(k);
            let t = lambda + f.v;
            let e = c.b(t)[0] * g.h * g.h + c.e(t)[0] * g.k + 0.5 * c.epsilon * g.grad_norm2(&f) + c.w(t)[0];
            dens.push(e * g.j);
            phase.push(t * g.j);
        }
        let energy = self.grid.integrate(&dens) - c.pressure * enclosed_volume(&ev.geom);
        (energy, ev.geom.area(), self.grid.integrate(&phase))
    }

    /// `∫_Σ [B H² + E K + (ε/2)|∇_Σφ|² + W] ds − pV`.
    pub fn energy(&self, state: &ModelState, lambda: f64) -> Result<f64> {
        Ok(self.energy_parts(&self.evaluate(state)?, lambda).0)
    }

    /// Raw constraint values `(∫J − 4π, ∫φJ)`.
    pub fn constraints(&self, state: &ModelState, _lambda: f64) -> Result<(f64, f64)> {
        let geom = self.geometry(state)?;
        let phi = crate::harmonics::synthesize(&state.phi, &self.grid)?;
        Ok((geom.area() - 4.0 * PI, geom.integrate_on_sigma(phi.values())))
    }

    /// Lagrangian `energy − γ(∫J − 4π) − μ(∫(λ+φ)J − 4πλ)`.
    pub fn lagrangian(&self, state: &ModelState, lambda: f64) -> Result<f64> {
        let (gamma, mu) = self.multipliers(state, lambda);
        let (e, area, phase) = self.energy_parts(&self.evaluate(state)?, lambda);
        Ok(e - gamma * (area - 4.0 * PI) - mu * (phase - 4.0 * PI * lambda))
    }
}
