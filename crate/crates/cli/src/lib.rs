//! Report generation and command implementations behind the `delab` binary.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use delab_core::analytic::{explicit_U, family_member, power_divergence_coefficient, power_solution};
use delab_core::awf::{read_field_file, write_field_file};
use delab_core::identities::{
    kazdan_warner_radial, kazdan_warner_translation, pohozaev_check, pohozaev_limit_probe, pohozaev_limit_value,
    WholeSpaceQuadrature, DEFAULT_SPHERE_DEGREE,
};
use delab_core::probes::{
    boundary_min_probe, decay_exponent, gradient_bound_probe, harnack_ratio, inversion_radius_estimate,
    singularity_fit,
};
use delab_core::varmin::{minimize_rayleigh, random_positive_guess, MinimizerConfig};
use delab_core::wgrid::{apply_l, sample, solve_dirichlet};
use delab_core::xforms::{ball_chart, ball_map, hyperbolic_lift, kelvin, residual_at, to_hardy, TransformedField};
use delab_core::{
    validate_params, AnalyticField, DelabError, Domain, FamilyParameters, GridField, GridSpec, Lcg64, ProblemParams,
};

/// Usage or validation failure (exit code 2) versus failed checks (exit code 1).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(DelabError),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<DelabError> for CliError {
    fn from(e: DelabError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Abs,
    Rel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tol: f64,
    pub mode: Mode,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, expected: f64, tol: f64, mode: Mode) -> Self {
        let err = (value - expected).abs();
        let pass = match mode {
            Mode::Abs => err <= tol,
            Mode::Rel => err <= tol * expected.abs(),
        };
        Check { name: name.into(), value, expected, tol, mode, pass: pass && value.is_finite() }
    }

    /// A yes/no outcome recorded as `1` against an expected `1`.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0, Mode::Abs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsInfo {
    pub n: usize,
    pub alpha: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub dims: [usize; 3],
    #[serde(rename = "L")]
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub params: ParamsInfo,
    pub grid: GridInfo,
    pub checks: Vec<Check>,
    pub pass_count: usize,
    pub fail_count: usize,
}

impl SuiteReport {
    pub fn new(suite: &str, p: &ProblemParams, grid: usize, l: f64, checks: Vec<Check>) -> Self {
        let pass_count = checks.iter().filter(|c| c.pass).count();
        SuiteReport {
            suite: suite.to_string(),
            params: ParamsInfo { n: p.n(), alpha: p.alpha(), s: p.s() },
            grid: GridInfo { dims: [grid; 3], l },
            fail_count: checks.len() - pass_count,
            pass_count,
            checks,
        }
    }

    pub fn passed(&self) -> bool {
        self.fail_count == 0
    }
}

pub const SUITES: [&str; 5] = ["exponents", "transforms", "pohozaev", "kazdan-warner", "probes"];

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub params: ProblemParams,
    pub grid: usize,
    pub half_width: f64,
    pub seed: u64,
}

pub fn parse_params(n: usize, alpha: f64, s: f64) -> CliResult<ProblemParams> {
    Ok(validate_params(n, alpha, s)?)
}

/// Runs one suite, or all of them for `"all"`.
pub fn run_suite(name: &str, cfg: &RunConfig) -> CliResult<SuiteReport> {
    if cfg.grid < 2 || !cfg.grid.is_multiple_of(2) {
        return Err(CliError::Core(DelabError::InvalidGrid(format!("grid {} must be even and >= 2", cfg.grid))));
    }
    let p = &cfg.params;
    let checks = match name {
        "exponents" => exponent_checks(p),
        "transforms" => transform_checks(cfg)?,
        "pohozaev" => pohozaev_checks(cfg)?,
        "kazdan-warner" => kazdan_warner_checks(cfg)?,
        "probes" => probe_checks(cfg)?,
        "all" => {
            let mut all = Vec::new();
            for s in SUITES {
                let r = run_suite(s, cfg)?;
                all.extend(r.checks.into_iter().map(|mut c| {
                    c.name = format!("{s}/{}", c.name);
                    c
                }));
            }
            all
        }
        other => return Err(CliError::Usage(format!("unknown suite '{other}'"))),
    };
    Ok(SuiteReport::new(name, p, cfg.grid, cfg.half_width, checks))
}

fn exponent_checks(p: &ProblemParams) -> Vec<Check> {
    let e = p.exponents();
    let (n, a, s) = (p.n() as f64, p.alpha(), p.s());
    let mut c = vec![
        Check::new("pstar", e.pstar, 2.0 * (n - s) / (n - 2.0), 1e-12, Mode::Abs),
        Check::new("weight_b", e.weight_b, a * e.pstar - s, 1e-12, Mode::Abs),
        Check::new("decay_d", e.decay_d, n - 2.0 + 2.0 * a, 1e-12, Mode::Abs),
        Check::new("hardy_lambda", e.hardy_lambda, a - a * a, 1e-12, Mode::Abs),
        Check::new("power_coefficient_at_d", power_divergence_coefficient(p, e.decay_d), 0.0, 0.0, Mode::Abs),
        Check::flag("hardy_lambda_below_quarter", e.hardy_lambda < 0.25),
    ];
    if p.is_explicit_regime() && p.n() == 3 {
        c.extend([
            Check::new("explicit/pstar", e.pstar, 8.0 / 3.0, 1e-6, Mode::Abs),
            Check::new("explicit/weight_b", e.weight_b, 1.0, 1e-6, Mode::Abs),
            Check::new("explicit/decay_d", e.decay_d, 3.0, 1e-12, Mode::Abs),
            Check::new("explicit/tau", e.tau, 0.5, 1e-12, Mode::Abs),
            Check::new("explicit/k_dim", e.k_dim as f64, 4.0, 0.0, Mode::Abs),
            Check::new("explicit/sigma_exp", e.sigma_exp, 0.0, 1e-6, Mode::Abs),
        ]);
    }
    c
}

fn sample_points(rng: &mut Lcg64, count: usize, n: usize, lo: f64, hi: f64, normal: (f64, f64)) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let mut x: Vec<f64> = (0..n - 1).map(|_| rng.uniform(lo, hi)).collect();
            x.push(rng.uniform(normal.0, normal.1));
            x
        })
        .collect()
}

/// Smallest `log2(r(h) / r(h/2))` over points whose residual is above roundoff.
fn min_order(tf: &TransformedField, pts: &[Vec<f64>], h: f64) -> CliResult<f64> {
    let mut worst = f64::INFINITY;
    for x in pts {
        let r1 = residual_at(tf, x, h)?.abs();
        let r2 = residual_at(tf, x, h / 2.0)?.abs();
        if r1 <= 1e-9 * tf.eval(x).abs().max(1.0) {
            continue;
        }
        worst = worst.min((r1 / r2).log2());
    }
    Ok(worst.min(2.0))
}

fn transform_checks(cfg: &RunConfig) -> CliResult<Vec<Check>> {
    let p = &cfg.params;
    let n = p.n();
    let d = p.exponents().decay_d;
    let mut rng = Lcg64::new(cfg.seed);
    let pts = sample_points(&mut rng, 20, n, -2.0, 2.0, (0.3, 2.0));
    let w = power_solution(p, d);
    let kw = kelvin(&w, 2.0, p)?;
    let kk = kelvin(&kelvin(&w.plus(&AnalyticField::constant(*p, 1.0)), 1.5, p)?, 1.5, p)?;
    let mut kelvin_const = 0.0f64;
    let mut involution = 0.0f64;
    for x in &pts {
        kelvin_const = kelvin_const.max((kw.eval(x) * 2f64.powf(d) - 1.0).abs());
        let u = w.eval(x) + 1.0;
        involution = involution.max((kk.eval(x) - u).abs() / u);
    }
    let mut c = vec![
        Check::new("kelvin_of_power_is_constant", kelvin_const, 0.0, 1e-12, Mode::Abs),
        Check::new("kelvin_involution", involution, 0.0, 1e-12, Mode::Abs),
    ];
    if p.is_explicit_regime() {
        let u = explicit_U(p)?;
        let hardy = to_hardy(&u, p);
        let x = pts[0].clone();
        c.push(Check::new("hardy_value", hardy.eval(&x), x[n - 1].powf(p.alpha()) * u.eval(&x), 1e-12, Mode::Rel));
        let lifted = hyperbolic_lift(&hardy)?;
        let member = family_member(p, &FamilyParameters::new(2.0, vec![0.3; n - 1])?)?;
        let ball = ball_map(&to_hardy(&member, p))?;
        let inner: Vec<Vec<f64>> = pts.iter().map(|x| x.iter().map(|v| 0.2 * v - 0.1).collect()).collect();
        let h = 0.05;
        c.push(Check::new("hardy_residual_order", min_order(&hardy, &pts, h)?, 2.0, 0.42, Mode::Abs));
        c.push(Check::new("hyperbolic_residual_order", min_order(&lifted, &pts, h)?, 2.0, 0.42, Mode::Abs));
        c.push(Check::new("ball_residual_order", min_order(&ball, &inner, h)?, 2.0, 0.42, Mode::Abs));
        let (hx, _) = ball_chart(&[0.1, 0.2, 0.3][..n.min(3)])?;
        c.push(Check::flag("ball_chart_lands_in_half_space", hx[hx.len() - 1] > 0.0));
    }
    Ok(c)
}

fn pohozaev_checks(cfg: &RunConfig) -> CliResult<Vec<Check>> {
    let p = &cfg.params;
    p.require_subcritical()?;
    let mut c = Vec::new();
    let one = AnalyticField::constant(*p, 1.0);
    if p.n() == 3 {
        let w = power_solution(p, p.exponents().decay_d);
        let pure = pohozaev_check(&w, &one, 1.0, p, DEFAULT_SPHERE_DEGREE, cfg.grid)?;
        c.push(Check::new("pure_power_boundary_term", pure.boundary_b_term, 0.0, 1e-12, Mode::Abs));
        let target = pohozaev_limit_value(1.0, p, DEFAULT_SPHERE_DEGREE)?;
        let zero = AnalyticField::constant(*p, 0.0);
        for (i, v) in pohozaev_limit_probe(1.0, &zero, &[1.0, 0.5, 0.25], p, DEFAULT_SPHERE_DEGREE)?.iter().enumerate() {
            c.push(Check::new(format!("limit_probe_{i}"), *v, target, 1e-6, Mode::Rel));
        }
        if p.is_explicit_regime() {
            let u = explicit_U(p)?;
            let r = pohozaev_check(&u, &one, 1.0, p, DEFAULT_SPHERE_DEGREE, cfg.grid)?;
            let scale = r.boundary_k_term.abs().max(r.boundary_b_term.abs());
            c.push(Check::new("explicit/volume_term", r.volume_term, 0.0, 0.0, Mode::Abs));
            c.push(Check::new("explicit/boundary_K_term", r.boundary_k_term, -r.boundary_b_term, 1e-2, Mode::Rel));
            c.push(Check::new("explicit/boundary_B_term", r.boundary_b_term, -r.boundary_k_term, 1e-2, Mode::Rel));
            c.push(Check::new("explicit/residual", r.residual, 0.0, 1e-2 * scale, Mode::Abs));
        }
    }
    Ok(c)
}

fn kazdan_warner_checks(cfg: &RunConfig) -> CliResult<Vec<Check>> {
    let p = &cfg.params;
    p.require_subcritical()?;
    let mut c = Vec::new();
    if !(p.is_explicit_regime() && p.n() == 3) {
        return Ok(c);
    }
    let u = explicit_U(p)?;
    let quad = WholeSpaceQuadrature { half_width: cfg.half_width, cells: cfg.grid.max(32) };
    let one = AnalyticField::constant(*p, 1.0);
    c.push(Check::new("constant_k_radial", kazdan_warner_radial(&u, &one, p, quad)?.value, 0.0, 0.0, Mode::Abs));
    c.push(Check::new("constant_k_translation", kazdan_warner_translation(&u, &one, 1, p, quad)?.value, 0.0, 0.0, Mode::Abs));
    let k2 = AnalyticField::new(*p, Domain::FullSpace, |x| x.iter().map(|v| v * v).sum())
        .with_gradient(|x| x.iter().map(|v| 2.0 * v).collect());
    let k1 = AnalyticField::new(*p, Domain::FullSpace, |x| x[0]).with_gradient(|x| {
        let mut g = vec![0.0; x.len()];
        g[0] = 1.0;
        g
    });
    let rr = kazdan_warner_radial(&u, &k2, p, quad)?;
    let tr = kazdan_warner_translation(&u, &k1, 1, p, quad)?;
    c.push(Check::flag("radial_x2_nonexistence", rr.value > 0.0 && rr.nonexistence));
    c.push(Check::flag("translation_x1_nonexistence", tr.value > 0.0 && tr.nonexistence));
    Ok(c)
}

fn probe_checks(cfg: &RunConfig) -> CliResult<Vec<Check>> {
    let p = &cfg.params;
    let mut c = Vec::new();
    if p.n() != 3 {
        return Ok(c);
    }
    let spec = GridSpec::cube(cfg.grid, 1.0)?;
    let w = power_solution(p, p.exponents().decay_d);
    let g = GridField::from_fn(spec, |x| w.eval(&[x[0] - 3.0, x[1], x[2]]));
    let sol = solve_dirichlet(&g, &GridField::zeros(spec), p, 1e-12)?;
    let mp = boundary_min_probe(&sol);
    c.push(Check::flag("maximum_principle_margin_positive", mp.pass && mp.margin > 0.0));
    let u = w.scaled(5.0).plus(&AnalyticField::constant(*p, 2.0));
    let fit = singularity_fit(&u, &[0.5, 0.25, 0.125, 0.0625], p)?;
    c.push(Check::new("singularity_c_hat", fit.c_hat, 5.0, 1e-8, Mode::Abs));
    c.push(Check::new("singularity_b0_hat", fit.b0_hat, 2.0, 1e-8, Mode::Abs));
    if p.is_explicit_regime() {
        let ue = explicit_U(p)?;
        c.push(Check::new("harnack_ratio", harnack_ratio(&ue, 0.5, p)?, 3.375, 0.01, Mode::Rel));
        c.push(Check::new("decay_exponent", decay_exponent(&ue, &[8.0, 16.0, 32.0])?, -3.0, 0.05, Mode::Rel));
        c.push(Check::new("inversion_radius", inversion_radius_estimate(&ue, &[1.0, 0.0], p)?, 2f64.sqrt(), 1e-12, Mode::Rel));
        let gb = gradient_bound_probe(&ue, &[0.01, 0.005, 0.0025, 0.00125])?;
        c.push(Check::flag("gradient_bound_respected", !gb.violation && gb.exponent >= -0.1));
        let rem = singularity_fit(&ue, &[0.01, 0.005, 0.0025, 0.00125], p)?;
        c.push(Check::new("removable_c_hat", rem.c_hat, 0.0, 1e-6 * ue.eval(&[0.0; 3]), Mode::Abs));
    }
    Ok(c)
}

/// One CSV row of `best-constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantRow {
    pub alpha: f64,
    pub s: f64,
    pub n: usize,
    pub dims: usize,
    pub l: f64,
    pub rayleigh: f64,
    pub iters: usize,
    pub converged: bool,
}

pub const CONSTANT_HEADER: &str = "alpha,s,N,dims,L,rayleigh,iters,converged";

impl ConstantRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.12e},{},{}",
            self.alpha, self.s, self.n, self.dims, self.l, self.rayleigh, self.iters, self.converged
        )
    }
}

pub fn best_constant(
    n: usize,
    alphas: &[f64],
    ss: &[f64],
    grid: usize,
    l: f64,
    seed: u64,
    max_iters: usize,
) -> CliResult<Vec<ConstantRow>> {
    if alphas.is_empty() || ss.is_empty() {
        return Err(CliError::Usage("alpha and s lists must be non-empty".into()));
    }
    if n != 3 {
        return Err(CliError::Core(DelabError::UnsupportedDimension("gridded minimization needs N = 3".into())));
    }
    let spec = GridSpec::cube(grid, l)?;
    let mut params = Vec::new();
    for &a in alphas {
        for &s in ss {
            let p = validate_params(n, a, s)?;
            p.require_subcritical()?;
            params.push(p);
        }
    }
    let cfg = MinimizerConfig { max_iters, ..Default::default() };
    let mut rows = Vec::new();
    for p in params {
        let row = match minimize_rayleigh(&random_positive_guess(spec, seed), &p, &cfg) {
            Ok(r) => ConstantRow {
                alpha: p.alpha(),
                s: p.s(),
                n,
                dims: grid,
                l,
                rayleigh: r.rayleigh,
                iters: r.iterations,
                converged: r.converged,
            },
            Err(_) => ConstantRow { alpha: p.alpha(), s: p.s(), n, dims: grid, l, rayleigh: f64::NAN, iters: 0, converged: false },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Source of a `transform`: an AWF1/CSV file or a closed-form field.
#[derive(Debug, Clone)]
pub enum FieldSource {
    File(std::path::PathBuf),
    /// `U`, `power:<l>` or `const:<c>`, sampled on `grid^3` cells of half-width `L`.
    Analytic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformOp {
    Sample,
    Kelvin,
    Invert,
    Hardy,
    Lift,
    Ball,
}

impl std::str::FromStr for TransformOp {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "sample" => TransformOp::Sample,
            "kelvin" => TransformOp::Kelvin,
            "invert" => TransformOp::Invert,
            "hardy" => TransformOp::Hardy,
            "lift" => TransformOp::Lift,
            "ball" => TransformOp::Ball,
            other => return Err(CliError::Usage(format!("unknown op '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub ops: Vec<String>,
    pub cells: usize,
    /// Cells whose preimage left the grid or the target domain; written as 0.
    pub out_of_range: usize,
    /// Cells at a singular point of the map; written as 0.
    pub singular: usize,
}

pub fn parse_analytic(spec: &str, p: &ProblemParams) -> CliResult<AnalyticField> {
    if spec == "U" {
        return Ok(explicit_U(p)?);
    }
    if let Some(l) = spec.strip_prefix("power:") {
        let l: f64 = l.parse().map_err(|_| CliError::Usage(format!("bad power '{l}'")))?;
        return Ok(power_solution(p, l));
    }
    if let Some(c) = spec.strip_prefix("const:") {
        let c: f64 = c.parse().map_err(|_| CliError::Usage(format!("bad constant '{c}'")))?;
        return Ok(AnalyticField::constant(*p, c));
    }
    Err(CliError::Usage(format!("unknown field '{spec}' (expected U, power:<l> or const:<c>)")))
}

fn analytic_op(u: AnalyticField, op: TransformOp, lam: f64, p: &ProblemParams) -> CliResult<AnalyticField> {
    Ok(match op {
        TransformOp::Sample => u,
        TransformOp::Kelvin => kelvin(&u, lam, p)?,
        TransformOp::Invert => kelvin(&u, 1.0, p)?,
        TransformOp::Hardy => to_hardy(&u, p).field,
        TransformOp::Lift => hyperbolic_lift(&TransformedField::anisotropic(&u))?.field,
        TransformOp::Ball => ball_map(&TransformedField::anisotropic(&u))?.field,
    })
}

/// Pointwise transform of grid values; `None` marks out-of-range, `Some(None)` a singular cell.
fn grid_op_value(u: &GridField, op: TransformOp, lam: f64, p: &ProblemParams, x: &[f64; 3]) -> Option<Option<f64>> {
    let e = p.exponents();
    let own = || u.interpolate(x);
    match op {
        TransformOp::Sample => own().map(Some),
        TransformOp::Kelvin | TransformOp::Invert => {
            let lam = if op == TransformOp::Invert { 1.0 } else { lam };
            let r2 = x.iter().map(|v| v * v).sum::<f64>();
            if r2 == 0.0 {
                return Some(None);
            }
            let y = [lam * lam * x[0] / r2, lam * lam * x[1] / r2, lam * lam * x[2] / r2];
            u.interpolate(&y).map(|v| Some((lam * lam / r2).powf(e.decay_d / 2.0) * v))
        }
        TransformOp::Hardy => (x[2] > 0.0).then(|| own().map(|v| x[2].powf(p.alpha()) * v)),
        TransformOp::Lift => (x[2] > 0.0).then(|| own().map(|v| x[2].powf(e.decay_d / 2.0) * v)),
        TransformOp::Ball => {
            if x.iter().map(|v| v * v).sum::<f64>() >= 1.0 {
                return None;
            }
            match ball_chart(x) {
                Err(_) => Some(None),
                Ok((h, rho)) => u.interpolate(&h).map(|v| Some(h[2].max(0.0).powf(p.alpha()) * v * rho)),
            }
        }
    }
}

pub fn grid_transform(
    u: &GridField,
    ops: &[TransformOp],
    lam: f64,
    p: &ProblemParams,
) -> (GridField, TransformReport) {
    let mut cur = u.clone();
    let mut out_of_range = 0;
    let mut singular = 0;
    for &op in ops {
        let spec = cur.spec;
        let mut values = vec![0.0; spec.len()];
        for (idx, v) in values.iter_mut().enumerate() {
            match grid_op_value(&cur, op, lam, p, &spec.center_of(idx)) {
                Some(Some(val)) => *v = val,
                Some(None) => singular += 1,
                None => out_of_range += 1,
            }
        }
        cur = GridField { spec, values };
    }
    let report = TransformReport {
        ops: ops.iter().map(|o| format!("{o:?}").to_lowercase()).collect(),
        cells: cur.spec.len(),
        out_of_range,
        singular,
    };
    (cur, report)
}

/// Applies `ops` in order and writes the result to `out`.
pub fn run_transform(
    source: &FieldSource,
    ops: &[TransformOp],
    lam: f64,
    cfg: &RunConfig,
    out: &Path,
) -> CliResult<TransformReport> {
    let p = &cfg.params;
    if ops.is_empty() {
        return Err(CliError::Usage("no transform op given".into()));
    }
    if !(lam > 0.0) {
        return Err(CliError::Core(DelabError::NonpositiveDilation(lam)));
    }
    let (field, report) = match source {
        FieldSource::File(path) => {
            let (header, u) = read_field_file(path, Some((cfg.half_width, p.alpha(), p.s())))
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let fp = validate_params(3, header.alpha, header.s)?;
            grid_transform(&u, ops, lam, &fp)
        }
        FieldSource::Analytic(spec) => {
            if p.n() != 3 {
                return Err(CliError::Core(DelabError::UnsupportedDimension("grid output needs N = 3".into())));
            }
            let mut f = parse_analytic(spec, p)?;
            for &op in ops {
                f = analytic_op(f, op, lam, p)?;
            }
            let gspec = GridSpec::cube(cfg.grid, cfg.half_width)?;
            let mut singular = 0;
            let mut out_of_range = 0;
            let values = (0..gspec.len())
                .map(|i| {
                    let x = gspec.center_of(i);
                    if !f.domain().contains(&x) {
                        out_of_range += 1;
                        return 0.0;
                    }
                    let v = f.eval(&x);
                    if v.is_finite() {
                        v
                    } else {
                        singular += 1;
                        0.0
                    }
                })
                .collect();
            let report = TransformReport {
                ops: ops.iter().map(|o| format!("{o:?}").to_lowercase()).collect(),
                cells: gspec.len(),
                out_of_range,
                singular,
            };
            (GridField { spec: gspec, values }, report)
        }
    };
    write_field_file(out, &field, p.alpha(), p.s())?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    AnnulusResidual,
    ExplicitResidual,
    PohozaevResidual,
    /// Radial integral with `K = |x|^2`; a value, not a residual.
    KazdanWarnerRadial,
}

impl std::str::FromStr for Quantity {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "annulus-residual" => Quantity::AnnulusResidual,
            "explicit-residual" => Quantity::ExplicitResidual,
            "pohozaev-residual" => Quantity::PohozaevResidual,
            "kazdan-warner-radial" => Quantity::KazdanWarnerRadial,
            other => return Err(CliError::Usage(format!("unknown quantity '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub grid: usize,
    pub half_width: f64,
    pub h: f64,
    pub value: f64,
    /// Grid sweeps: `log2(v_prev / v)`. Half-width sweeps: `|v - v_prev| / |v|`.
    pub change: Option<f64>,
}

/// `(h, value)` on `n^3` cells of half-width `l`.
fn quantity_at(q: Quantity, n: usize, l: f64, p: &ProblemParams) -> CliResult<(f64, f64)> {
    let spec = GridSpec::cube(n, l)?;
    let h = spec.spacing()[0];
    match q {
        Quantity::AnnulusResidual => {
            let w = sample(&power_solution(p, p.exponents().decay_d), &spec)?;
            let lw = apply_l(&w, p);
            let mut acc = 0.0;
            for idx in 0..spec.len() {
                let x = spec.center_of(idx);
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (1.0..=2.0).contains(&r) && x[2].abs() > 0.2 {
                    acc += lw.values[idx].powi(2);
                }
            }
            Ok((h, (acc * spec.cell_volume()).sqrt()))
        }
        Quantity::ExplicitResidual => {
            let e = p.exponents();
            let u = sample(&explicit_U(p)?, &spec)?;
            let lu = apply_l(&u, p);
            let mut acc = 0.0;
            for idx in 0..spec.len() {
                let [i, j, k] = spec.unravel(idx);
                let z = spec.coord(2, k);
                if spec.is_ring(i, j, k) || z.abs() <= 0.2 {
                    continue;
                }
                let rhs = z.abs().powf(e.weight_b) * u.values[idx].powf(e.pstar - 1.0);
                acc += (lu.values[idx] - rhs).powi(2);
            }
            Ok((h, (acc * spec.cell_volume()).sqrt()))
        }
        Quantity::PohozaevResidual => {
            let u = explicit_U(p)?;
            let one = AnalyticField::constant(*p, 1.0);
            // sphere degree refined together with the volume cells
            let degree = (n / 8).max(2) & !1;
            let r = pohozaev_check(&u, &one, 1.0, p, degree, n)?;
            Ok((2.0 / n as f64, r.residual.abs()))
        }
        Quantity::KazdanWarnerRadial => {
            let u = explicit_U(p)?;
            let k = AnalyticField::new(*p, Domain::FullSpace, |x| x.iter().map(|v| v * v).sum())
                .with_gradient(|x| x.iter().map(|v| 2.0 * v).collect());
            let r = kazdan_warner_radial(&u, &k, p, WholeSpaceQuadrature { half_width: l, cells: n })?;
            Ok((h, r.value))
        }
    }
}

fn needs_explicit(q: Quantity, p: &ProblemParams) -> CliResult<()> {
    if p.n() != 3 {
        return Err(CliError::Core(DelabError::UnsupportedDimension("gridded quantities need N = 3".into())));
    }
    if q != Quantity::AnnulusResidual && !p.is_explicit_regime() {
        return Err(CliError::Usage("this quantity needs the explicit regime (alpha = 1, s = 5/3)".into()));
    }
    Ok(())
}

/// Refinement sweep over `grids`; the annulus quantity uses half-width 4, the rest `cfg.half_width`.
pub fn convergence(grids: &[usize], q: Quantity, cfg: &RunConfig) -> CliResult<Vec<ConvergenceRow>> {
    if grids.len() < 2 {
        return Err(CliError::Usage("convergence needs at least two grid sizes".into()));
    }
    needs_explicit(q, &cfg.params)?;
    let l = if q == Quantity::AnnulusResidual { 4.0 } else { cfg.half_width };
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in grids {
        let (h, value) = quantity_at(q, n, l, &cfg.params)?;
        let change = rows.last().map(|prev| (prev.value / value).log2());
        rows.push(ConvergenceRow { grid: n, half_width: l, h, value, change });
    }
    Ok(rows)
}

/// Truncation sweep over half-widths at the spacing of `cfg.grid` cells on `cfg.half_width`.
pub fn truncation(half_widths: &[f64], q: Quantity, cfg: &RunConfig) -> CliResult<Vec<ConvergenceRow>> {
    if half_widths.len() < 2 {
        return Err(CliError::Usage("truncation study needs at least two half-widths".into()));
    }
    needs_explicit(q, &cfg.params)?;
    let h = 2.0 * cfg.half_width / cfg.grid as f64;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &l in half_widths {
        let n = ((2.0 * l / h / 2.0).round() as usize * 2).max(2);
        let (h, value) = quantity_at(q, n, l, &cfg.params)?;
        let change = rows.last().map(|prev| (value - prev.value).abs() / value.abs());
        rows.push(ConvergenceRow { grid: n, half_width: l, h, value, change });
    }
    Ok(rows)
}

pub fn convergence_table(rows: &[ConvergenceRow], change_label: &str) -> String {
    let mut s = format!("grid,L,h,value,{change_label}\n");
    for r in rows {
        let change = match r.change {
            Some(o) if change_label == "order" => format!("{o:.4}"),
            Some(o) => format!("{o:.3e}"),
            None => String::new(),
        };
        let _ = writeln!(s, "{},{},{},{:.6e},{}", r.grid, r.half_width, r.h, r.value, change);
    }
    s
}
