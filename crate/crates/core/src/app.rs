//! Run configuration and the command implementations behind the `vesicle`
//! binary. Commands return their outputs in memory; the binary writes them.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::continuation::{frozen_u_probe, run_branch, setup, ContinuationConfig};
use crate::error::{Error, Result};
use crate::geometry::{geometry_from_u, mesh_obj};
use crate::harmonics::{build_grid, coeff_index, n_coeffs, SpectralField};
use crate::linear::{
    characteristic_roots_in, default_interval, linearization_defect, mode_data, modes, tau_variational,
};
use crate::model::{Model, ModelConfig, ModelState, StateFile};
use crate::residual::{GalerkinSystem, ReducedBasis};
use crate::symmetry::{act, fixed_space, FixedSpace, GroupElement, Subgroup};

const RUN_KEYS: [&str; 8] = ["subgroup", "l", "interval", "root", "continuation", "out", "seed", "snapshot_every"];

/// Model schema plus run keys, read from one flat JSON object.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub subgroup: String,
    pub l: Vec<usize>,
    /// `λ` search interval for roots; the widened spinodal when absent.
    pub interval: Option<[f64; 2]>,
    /// Only continue from the root nearest this value.
    pub root: Option<f64>,
    pub continuation: ContinuationConfig,
    pub out: String,
    pub seed: u64,
    /// OBJ snapshot period along branches; 0 disables.
    pub snapshot_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            subgroup: "D6d".into(),
            l: vec![3],
            interval: None,
            root: None,
            continuation: ContinuationConfig::default(),
            out: "out".into(),
            seed: 0,
            snapshot_every: 5,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunKeys {
    subgroup: Option<String>,
    l: Option<Vec<usize>>,
    interval: Option<[f64; 2]>,
    root: Option<f64>,
    continuation: Option<ContinuationConfig>,
    out: Option<String>,
    seed: Option<u64>,
    snapshot_every: Option<usize>,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(config_err)?;
        let Value::Object(mut all) = v else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        let mut run = Map::new();
        for k in RUN_KEYS {
            if let Some(x) = all.remove(k) {
                run.insert(k.to_string(), x);
            }
        }
        let model: ModelConfig = serde_json::from_value(Value::Object(all)).map_err(config_err)?;
        let keys: RunKeys = serde_json::from_value(Value::Object(run)).map_err(config_err)?;
        let d = RunConfig::default();
        Ok(RunConfig {
            model,
            subgroup: keys.subgroup.unwrap_or(d.subgroup),
            l: keys.l.unwrap_or(d.l),
            interval: keys.interval,
            root: keys.root,
            continuation: keys.continuation.unwrap_or(d.continuation),
            out: keys.out.unwrap_or(d.out),
            seed: keys.seed.unwrap_or(d.seed),
            snapshot_every: keys.snapshot_every.unwrap_or(d.snapshot_every),
        })
    }

    /// Flat JSON with sorted keys.
    pub fn to_json(&self) -> Result<String> {
        let mut m = match serde_json::to_value(&self.model)? {
            Value::Object(m) => m,
            _ => unreachable!("model config serializes to an object"),
        };
        m.insert("subgroup".into(), json!(self.subgroup));
        m.insert("l".into(), json!(self.l));
        if let Some(i) = self.interval {
            m.insert("interval".into(), json!(i));
        }
        if let Some(r) = self.root {
            m.insert("root".into(), json!(r));
        }
        m.insert("continuation".into(), serde_json::to_value(self.effective_continuation())?);
        m.insert("out".into(), json!(self.out));
        m.insert("seed".into(), json!(self.seed));
        m.insert("snapshot_every".into(), json!(self.snapshot_every));
        Ok(serde_json::to_string_pretty(&Value::Object(m))? + "\n")
    }

    /// Continuation settings with the run-level subgroup and `L_max`.
    pub fn effective_continuation(&self) -> ContinuationConfig {
        ContinuationConfig { subgroup: self.subgroup.clone(), l_max: self.model.l_max, ..self.continuation.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.constitutive()?;
        if self.model.l_max < 2 {
            return Err(Error::Config("l_max must be at least 2".into()));
        }
        Subgroup::named(&self.subgroup)?;
        if let Some(&l) = self.l.iter().find(|&&l| l > self.model.l_max) {
            return Err(Error::Config(format!("l = {l} exceeds l_max = {}", self.model.l_max)));
        }
        if let Some([a, b]) = self.interval {
            if !(a < b) {
                return Err(Error::Config("interval must be increasing".into()));
            }
        }
        let mut c = self.effective_continuation();
        c.l = self.l.first().copied().unwrap_or(c.l).min(c.l_max);
        c.validate()
    }

    pub fn build_model(&self) -> Result<Model> {
        Model::from_config(&self.model)
    }

    fn interval(&self) -> Result<(f64, f64)> {
        Ok(match self.interval {
            Some([a, b]) => (a, b),
            None => default_interval(&self.model.constitutive()?),
        })
    }
}

/// Files and console text produced by a command.
#[derive(Clone, Debug, Default)]
pub struct Output {
    pub files: Vec<(String, String)>,
    pub stdout: String,
    /// False when a check failed or a requested object does not exist.
    pub ok: bool,
}

/// Shortest round-trip decimal.
pub fn fmt_f64(x: f64) -> String {
    format!("{:?}", x + 0.0)
}

pub fn cmd_roots(cfg: &RunConfig) -> Result<Output> {
    let c = cfg.model.constitutive()?;
    let interval = cfg.interval()?;
    let mut csv = String::from("l,root,crossing_slope,kind\n");
    for &l in &cfg.l {
        let r = characteristic_roots_in(l, &c, interval);
        for (t, kind) in r.transversal.iter().map(|t| (t, "transversal")).chain(r.tangential.iter().map(|t| (t, "tangential"))) {
            writeln!(csv, "{l},{},{},{kind}", fmt_f64(*t), fmt_f64(c.psi(*t)[3])).unwrap();
        }
    }
    Ok(Output { files: vec![("roots.csv".into(), csv.clone())], stdout: csv, ok: true })
}

pub fn cmd_mode_table(cfg: &RunConfig) -> Result<Output> {
    let c = cfg.model.constitutive()?;
    let interval = cfg.interval()?;
    let mut csv = String::from("l,lambda,sigma,tau,slope,pitchfork,tau_variational\n");
    for &l in &cfg.l {
        for t in characteristic_roots_in(l, &c, interval).transversal {
            let m = mode_data(l, t, &c);
            writeln!(
                csv,
                "{l},{},{},{},{},{},{}",
                fmt_f64(m.lambda),
                fmt_f64(m.sigma),
                fmt_f64(m.tau),
                fmt_f64(m.slope),
                m.pitchfork,
                fmt_f64(tau_variational(l, t, &c))
            )
            .unwrap();
        }
    }
    Ok(Output { files: vec![("modes.csv".into(), csv.clone())], stdout: csv, ok: true })
}

fn fixed_space_json(fs: &FixedSpace) -> Value {
    let vectors: Vec<Value> = (0..fs.dimension)
        .map(|k| {
            let integer = fs.integer_form(k);
            let m0 = fs.coeff(k, 0);
            let scale = fs.normalized[k].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let chop = |i: usize, v: f64| if fs.normalized[k][i].abs() <= 1e-12 * scale { 0.0 } else { v + 0.0 };
            let rows: Vec<Value> = (0..2 * fs.l + 1)
                .map(|i| {
                    let m = i as i64 - fs.l as i64;
                    json!({
                        "m": m,
                        "normalized": chop(i, fs.normalized[k][i]),
                        "unnormalized": chop(i, fs.unnormalized[k][i]),
                        "integer": chop(i, integer[i]),
                        "ratio_to_m0": if m0.abs() > 1e-12 { json!(chop(i, fs.unnormalized[k][i] / m0)) } else { Value::Null },
                    })
                })
                .collect();
            json!({ "coefficients": rows })
        })
        .collect();
    json!({ "l": fs.l, "subgroup": fs.group, "dimension": fs.dimension, "vectors": vectors })
}

fn nodal_mesh(fs: &FixedSpace) -> String {
    let l = fs.l;
    let mut c = vec![0.0; n_coeffs(l)];
    for (i, v) in fs.normalized[0].iter().enumerate() {
        c[coeff_index(l, i as i64 - l as i64)] = *v;
    }
    let f = SpectralField::from_normalized(l, &c);
    let grid = build_grid(l.max(16));
    mesh_obj(&SpectralField::zeros(l), &grid, Some(&f))
}

pub fn cmd_direction(cfg: &RunConfig) -> Result<Output> {
    let group = Subgroup::named(&cfg.subgroup)?;
    let c = cfg.model.constitutive()?;
    let mut out = Output { ok: true, ..Default::default() };
    let mut reports = Vec::new();
    for &l in &cfg.l {
        let fs = fixed_space(l, &group)?;
        let mut rep = fixed_space_json(&fs);
        let ms: Vec<Value> = modes(l, &c).iter().map(|m| json!({ "lambda": m.lambda, "tau": m.tau, "tau_variational": tau_variational(l, m.lambda, &c) })).collect();
        rep["modes"] = json!(ms);
        if fs.dimension == 1 {
            out.files.push((format!("nodal_l{l}_{}.obj", group.name), nodal_mesh(&fs)));
        } else {
            out.ok = false;
            rep["error"] = json!(Error::FixedSpaceDimension { l, group: group.name.clone(), dim: fs.dimension }.to_string());
        }
        out.files.push((format!("direction_l{l}_{}.json", group.name), serde_json::to_string_pretty(&rep)? + "\n"));
        reports.push(rep);
    }
    out.stdout = serde_json::to_string_pretty(&reports)? + "\n";
    Ok(out)
}

pub fn cmd_nodal_export(cfg: &RunConfig) -> Result<Output> {
    let group = Subgroup::named(&cfg.subgroup)?;
    let mut out = Output { ok: true, ..Default::default() };
    for &l in &cfg.l {
        let fs = fixed_space(l, &group)?;
        if fs.dimension != 1 {
            out.ok = false;
            writeln!(out.stdout, "{}", Error::FixedSpaceDimension { l, group: group.name.clone(), dim: fs.dimension }).unwrap();
            continue;
        }
        let name = format!("nodal_l{l}_{}.obj", group.name);
        writeln!(out.stdout, "wrote {name}").unwrap();
        out.files.push((name, nodal_mesh(&fs)));
    }
    Ok(out)
}

/// Sup norms of the residual on the trivial branch for 30 `λ` in `[−1.5, 1.5]`,
/// and at an optional state.
pub fn cmd_residual_check(cfg: &RunConfig, state: Option<&StateFile>) -> Result<Output> {
    let model = cfg.build_model()?;
    let mut csv = String::from("lambda,phase_inf,shape_inf,c_area,c_phase,state\n");
    let mut worst = 0.0f64;
    let trivial = ModelState::trivial(model.l_max());
    for i in 0..30 {
        let lambda = -1.5 + 3.0 * i as f64 / 29.0;
        let r = model.full_residual(&trivial, lambda)?;
        worst = worst.max(r.inf_norm());
        writeln!(csv, "{},{},{},{},{},trivial", fmt_f64(lambda), fmt_f64(r.r_phase.max_abs()), fmt_f64(r.r_shape.max_abs()), fmt_f64(r.c_area), fmt_f64(r.c_phase)).unwrap();
    }
    if let Some(sf) = state {
        let s = sf.state();
        let s = ModelState { phi: s.phi.resized(model.l_max()), u: s.u.resized(model.l_max()), ..s };
        let r = model.full_residual(&s, sf.lambda)?;
        writeln!(csv, "{},{},{},{},{},file", fmt_f64(sf.lambda), fmt_f64(r.r_phase.max_abs()), fmt_f64(r.r_shape.max_abs()), fmt_f64(r.c_area), fmt_f64(r.c_phase)).unwrap();
    }
    let ok = worst <= 1e-9;
    let stdout = format!("{csv}trivial branch sup norm {} ({})\n", fmt_f64(worst), if ok { "pass" } else { "FAIL" });
    Ok(Output { files: vec![("residual_check.csv".into(), csv)], stdout, ok })
}

pub fn cmd_continue(cfg: &RunConfig) -> Result<Output> {
    let model = cfg.build_model()?;
    let mut out = Output { ok: true, ..Default::default() };
    for &l in &cfg.l {
        let cc = ContinuationConfig { l, ..cfg.effective_continuation() };
        let (problem, _, _) = setup(&model, &cc, cfg.root)?;
        let group = Subgroup::named(&cc.subgroup)?;
        let mut targets = crate::continuation::detect_bifurcations(&model, l, &group, cfg.interval.map(|[a, b]| (a, b)))?;
        if let Some(h) = cfg.root {
            targets.sort_by(|a, b| (a.lambda - h).abs().total_cmp(&(b.lambda - h).abs()));
            targets.truncate(1);
        }
        for (ri, mode) in targets.iter().enumerate() {
            let direction = crate::symmetry::bifurcation_direction(cc.l_max, &group, mode)?;
            for (sign, tag) in [(1.0, "plus"), (-1.0, "minus")] {
                let branch = run_branch(&problem, mode, &direction, sign * cc.t0, &cc)?;
                let stem = format!("branch_l{l}_{}_r{ri}_{tag}", group.name);
                out.files.push((format!("{stem}.jsonl"), branch.to_json_lines()?));
                let mut csv = String::from("s,lambda,parameter,amplitude,energy,min_j,residual\n");
                for p in &branch.points {
                    writeln!(csv, "{},{},{},{},{},{},{}", fmt_f64(p.s), fmt_f64(p.lambda), fmt_f64(p.parameter), fmt_f64(p.amplitude), fmt_f64(p.energy), fmt_f64(p.min_j), fmt_f64(p.residual)).unwrap();
                }
                out.files.push((format!("{stem}_summary.csv"), csv));
                if cfg.snapshot_every > 0 {
                    let grid = build_grid(cc.l_max);
                    for (k, p) in branch.points.iter().enumerate().step_by(cfg.snapshot_every) {
                        let s = p.state(&problem.basis);
                        out.files.push((format!("{stem}_p{k:03}.obj"), mesh_obj(&s.u, &grid, Some(&s.phi))));
                    }
                }
                let meta = json!({
                    "mode": branch.mode,
                    "subgroup": branch.subgroup,
                    "parameter": branch.parameter,
                    "t0": branch.t0,
                    "points": branch.points.len(),
                    "folds": branch.folds,
                    "termination": branch.termination,
                });
                out.files.push((format!("{stem}_meta.json"), serde_json::to_string_pretty(&meta)? + "\n"));
                writeln!(
                    out.stdout,
                    "{stem}: lambda_l = {}, {} points, {} folds, termination {:?}",
                    fmt_f64(mode.lambda),
                    branch.points.len(),
                    branch.folds,
                    branch.termination
                )
                .unwrap();
            }
        }
        if targets.is_empty() {
            writeln!(out.stdout, "no bifurcation point for l = {l} in {}", group.name).unwrap();
        }
    }
    Ok(out)
}

/// One line of the self-check report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub defect: f64,
    pub tolerance: f64,
    pub detail: String,
}

fn check(name: &str, defect: f64, tolerance: f64, detail: String) -> Check {
    Check { name: name.into(), pass: defect <= tolerance, defect, tolerance, detail }
}

fn random_field(rng: &mut ChaCha8Rng, l_max: usize, degree: usize, amplitude: f64) -> SpectralField {
    use rand::Rng;
    let grid = build_grid(l_max);
    let mut c = vec![0.0; n_coeffs(l_max)];
    for l in 0..=degree.min(l_max) {
        for m in -(l as i64)..=(l as i64) {
            c[coeff_index(l, m)] = rng.random_range(-1.0..1.0) / (1.0 + l as f64).powi(2);
        }
    }
    let sup = grid.synthesize_normalized(&c, l_max).iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let c: Vec<f64> = c.iter().map(|v| v * amplitude / sup).collect();
    SpectralField::from_normalized(l_max, &c)
}

fn random_element(rng: &mut ChaCha8Rng, improper: bool) -> GroupElement {
    use rand::Rng;
    let axis = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let g = GroupElement::rotation(axis, rng.random_range(0.0..2.0 * PI));
    if improper {
        g.mul(&GroupElement::diag(-1.0, 1.0, 1.0))
    } else {
        g
    }
}

/// Reference fixed spaces with integer coefficient ratios: `(ℓ, subgroup, [(m, m_ref, ratio)])`.
pub const REFERENCE_RATIOS: [(usize, &str, &[(i64, i64, f64)]); 7] = [
    (3, "D6d", &[]),
    (3, "O_minus", &[]),
    (4, "O2xZ2c", &[]),
    (4, "OxZ2c", &[(0, 4, 168.0)]),
    (6, "IxZ2c", &[(0, 5, -3960.0)]),
    (10, "IxZ2c", &[(0, 10, 896_313_600.0), (5, 10, 27_360.0)]),
    (12, "IxZ2c", &[(0, 10, 57_001_190_400.0 / 4.0), (5, 10, -221_760.0 / 4.0)]),
];

/// Reference fixed spaces spanned by one harmonic: `(ℓ, subgroup, m)`.
pub const SINGLE_HARMONIC: [(usize, &str, i64); 3] = [(3, "D6d", 3), (3, "O_minus", -2), (4, "O2xZ2c", 0)];

/// Worst relative deviation from the reference table, and whether every
/// dimension is one.
pub fn reference_table_defect() -> Result<(f64, bool)> {
    let mut worst = 0.0f64;
    let mut dims = true;
    for (l, name, ratios) in REFERENCE_RATIOS {
        let fs = fixed_space(l, &Subgroup::named(name)?)?;
        if fs.dimension != 1 {
            dims = false;
            continue;
        }
        for &(m, r, want) in ratios {
            let got = fs.coeff(0, m) / fs.coeff(0, r);
            worst = worst.max(((got - want) / want).abs());
        }
    }
    for (l, name, m) in SINGLE_HARMONIC {
        let fs = fixed_space(l, &Subgroup::named(name)?)?;
        if fs.dimension != 1 {
            dims = false;
            continue;
        }
        let v = &fs.normalized[0];
        let k = (m + l as i64) as usize;
        let off: f64 = v.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, x)| x.abs()).fold(0.0, f64::max);
        worst = worst.max(off).max((v[k] - 1.0).abs());
    }
    Ok((worst, dims))
}

/// Relative equivariance defect of the Galerkin-projected residual.
pub fn equivariance_defect(model: &Model, state: &ModelState, lambda: f64, g: &GroupElement) -> Result<f64> {
    let l = model.l_max();
    let basis = ReducedBasis::full(l);
    let sys = GalerkinSystem::new(model, &basis)?;
    let nc = n_coeffs(l);
    let split = |p: Vec<f64>| ModelState {
        phi: SpectralField::from_normalized(l, &p[..nc]),
        u: SpectralField::from_normalized(l, &p[nc..2 * nc]),
        zeta: p[2 * nc],
        xi: p[2 * nc + 1],
    };
    let f = split(sys.project(&model.full_residual(state, lambda)?, &[]));
    let fg = split(sys.project(&model.full_residual(&act(g, state)?, lambda)?, &[]));
    let rot = act(g, &f)?;
    let d = rot.axpy(-1.0, &fg);
    let sup = |s: &ModelState| {
        s.phi.to_normalized().iter().chain(s.u.to_normalized().iter()).fold(s.zeta.abs().max(s.xi.abs()), |a, v| a.max(v.abs()))
    };
    Ok(sup(&d) / sup(&f).max(1.0))
}

/// Resolution consistency at a degree-6 icosahedral test state: relative
/// change of the degree-`≤ L_max` part of the residual when the grid is
/// refined by eight degrees. Infinite when the state is not representable.
pub fn aliasing_defect(model: &Model) -> Result<f64> {
    let l_max = model.l_max();
    let probe_l = 6;
    if probe_l > l_max {
        return Ok(f64::INFINITY);
    }
    let fs = fixed_space(probe_l, &Subgroup::named("IxZ2c")?)?;
    let mut c = vec![0.0; n_coeffs(probe_l)];
    for (i, v) in fs.normalized[0].iter().enumerate() {
        c[coeff_index(probe_l, i as i64 - probe_l as i64)] = 0.1 * v;
    }
    let low = |m: &Model| -> Result<Vec<f64>> {
        let l = m.l_max();
        let phi = SpectralField::from_normalized(probe_l, &c).resized(l);
        let s = ModelState { u: phi.scaled(0.5), phi, zeta: 0.0, xi: 0.0 };
        let r = m.full_residual(&s, 0.2)?;
        let mut v = m.grid().analyze_normalized(r.r_phase.values(), l_max);
        v.extend(m.grid().analyze_normalized(r.r_shape.values(), l_max));
        Ok(v)
    };
    let coarse = low(model)?;
    let fine = low(&model.with_l_max(l_max + 8))?;
    let scale = fine.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let diff = coarse.iter().zip(&fine).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    Ok(diff / scale.max(f64::MIN_POSITIVE))
}

/// Cross-module invariant suite.
pub fn selfcheck(cfg: &RunConfig, corrupt: bool) -> Result<Vec<Check>> {
    let base = cfg.build_model()?;
    let model = if corrupt { base.with_corrupted_multiplier_sign() } else { base };
    let l_max = model.l_max();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();

    let trivial = ModelState::trivial(l_max);
    let mut worst = 0.0f64;
    for i in 0..30 {
        let lambda = -1.5 + 3.0 * i as f64 / 29.0;
        worst = worst.max(model.full_residual(&trivial, lambda)?.inf_norm());
    }
    out.push(check("trivial_residual", worst, 1e-9, "sup norm over 30 lambda in [-1.5, 1.5]".into()));

    let mut gb = 0.0f64;
    let mut smallest_j = f64::INFINITY;
    for _ in 0..10 {
        let u = random_field(&mut rng, l_max, 4.min(l_max), 0.3);
        let g = geometry_from_u(&u, model.grid())?;
        let kj: Vec<f64> = g.nodes().iter().map(|n| n.k * n.j).collect();
        gb = gb.max((model.grid().integrate(&kj) - 4.0 * PI).abs());
        smallest_j = smallest_j.min(g.min_j());
    }
    out.push(check("gauss_bonnet", gb, 1e-8, format!("10 random u of degree <= 4, min J {}", fmt_f64(smallest_j))));

    let mut eq = 0.0f64;
    for k in 0..5 {
        let s = ModelState {
            phi: random_field(&mut rng, l_max, 4.min(l_max), 0.3),
            u: random_field(&mut rng, l_max, 4.min(l_max), 0.05),
            zeta: 0.1,
            xi: -0.2,
        };
        let g = match k {
            0 => GroupElement::identity().neg(),
            _ => random_element(&mut rng, k % 2 == 1),
        };
        eq = eq.max(equivariance_defect(&model, &s, 0.2, &g)?);
    }
    out.push(check("equivariance", eq, 1e-6, "5 (state, element) pairs including -I and reflections".into()));

    let mut lin = 0.0f64;
    let dl = l_max.min(8);
    for &lambda in &[-0.4, 0.1, 0.5] {
        for _ in 0..3 {
            let z = ModelState {
                phi: random_field(&mut rng, dl, dl, 1.0),
                u: random_field(&mut rng, dl, dl, 1.0),
                zeta: 0.7,
                xi: -0.4,
            };
            lin = lin.max(linearization_defect(&model, lambda, &z, true)?);
        }
    }
    out.push(check("linearization_fd", lin, 1e-6, "variational operator vs central differences, 3 lambda x 3 directions".into()));

    let (ratio, dims) = reference_table_defect()?;
    let ratio = if dims { ratio } else { f64::INFINITY };
    out.push(check("fixed_space_table", ratio, 1e-6, format!("reference ratios, all dimensions one: {dims}")));

    let c = &model.constitutive;
    let lambda = match c.spinodal() {
        Ok((a, b)) => 0.5 * (a + b),
        Err(_) => 0.0,
    };
    let probe = frozen_u_probe(&Model::new(c.clone(), 4), lambda, 20, cfg.seed)?;
    out.push(check(
        "frozen_u_probe",
        probe.full_system_patterns as f64,
        0.0,
        format!(
            "20 starts at lambda {}: {} trivial, {} stalled, {} phase-only patterns",
            fmt_f64(lambda),
            probe.trivial,
            probe.stalled,
            probe.phase_only_patterns
        ),
    ));

    let alias = aliasing_defect(&model)?;
    out.push(check("aliasing", alias, 1e-6, format!("degree-6 test state at l_max = {l_max} vs l_max + 8")));
    Ok(out)
}

pub fn cmd_selfcheck(cfg: &RunConfig, corrupt: bool) -> Result<Output> {
    let checks = selfcheck(cfg, corrupt)?;
    let mut text = String::new();
    for c in &checks {
        writeln!(text, "{} {}: defect {} (tol {}) {}", if c.pass { "PASS" } else { "FAIL" }, c.name, fmt_f64(c.defect), fmt_f64(c.tolerance), c.detail).unwrap();
    }
    let ok = checks.iter().all(|c| c.pass);
    let json = serde_json::to_string_pretty(&checks)? + "\n";
    Ok(Output { files: vec![("selfcheck.json".into(), json)], stdout: text, ok })
}

/// Reads a state file.
pub fn read_state(s: &str) -> Result<StateFile> {
    serde_json::from_str(s).map_err(config_err)
}

/// Process exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownSubgroup(_) | Error::Json(_) => 2,
        _ => 1,
    }
}
