//! Command pipelines: each resolves a config into a compute run, emits CSV
//! and JSON artifacts plus a manifest, and reports a tolerance verdict.

use std::path::Path;
use std::time::Instant;

use amlab_core::action::{
    aubry_set, default_tol_a, peierls_diag, solve_critical, AubrySetEstimate, EdgeCostMatrix,
    PeierlsDiag, SpaceGrid, WeakKamSolution,
};
use amlab_core::convex::{convexify, radial_flat, RadialFlatInterval, SamplePoint};
use amlab_core::lagrangian::{LagrangianSpec, OneFormSpec};
use amlab_core::mather::{
    beta_scan, build_lp, face_support, is_singular, mather_support, solve_lp, verify_theorem,
    BetaScan, Cycle, MatherSupport, MinimizingMeasure, SingularityOptions, SingularityReport,
    TheoremReport, TheoremTolerances, TheoremVerdict, Verdict,
};
use amlab_core::{norm, Point};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::emit::{fmt, EmitError, OutDir, StageTime};
use crate::lemmas::{run_suite, LemmaReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Alpha,
    Beta,
    Aubry,
    Mather,
    Flats,
    Singular,
    VerifyTheorem,
    LemmaSuite,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Alpha => "alpha",
            Command::Beta => "beta",
            Command::Aubry => "aubry",
            Command::Mather => "mather",
            Command::Flats => "flats",
            Command::Singular => "singular",
            Command::VerifyTheorem => "verify-theorem",
            Command::LemmaSuite => "lemma-suite",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error("invalid run setup: {0}")]
    Setup(String),
    #[error("{stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
}

fn stage_err<E: core::fmt::Debug>(stage: &'static str) -> impl Fn(E) -> RunError {
    move |e| RunError::Stage {
        stage,
        message: format!("{e:?}"),
    }
}

/// Structured results of a pipeline, for in-process consumers; the emitted
/// files carry the same data.
pub enum OutcomeData {
    Alpha {
        targets: Vec<Point>,
        alphas: Vec<f64>,
    },
    Beta {
        scan: BetaScan,
    },
    Aubry {
        costs: EdgeCostMatrix,
        sol: WeakKamSolution,
        diag: PeierlsDiag,
        est: AubrySetEstimate,
    },
    Mather {
        costs: EdgeCostMatrix,
        mu: MinimizingMeasure,
        support: MatherSupport,
        face: Vec<usize>,
    },
    Flats {
        ts: Vec<f64>,
        betas: Vec<f64>,
        flat: RadialFlatInterval,
    },
    Singular {
        report: SingularityReport,
    },
    Verify {
        costs: EdgeCostMatrix,
        report: TheoremReport,
    },
    Lemmas {
        report: LemmaReport,
    },
}

pub struct Outcome {
    /// True iff every declared tolerance was met.
    pub ok: bool,
    pub messages: Vec<String>,
    pub data: OutcomeData,
}

struct Context {
    l: LagrangianSpec,
    grid: SpaceGrid,
    tau: f64,
    cap: f64,
}

impl Context {
    fn new(cfg: &RunConfig) -> Result<Self, RunError> {
        let l = cfg.lagrangian().map_err(RunError::Setup)?;
        let grid = SpaceGrid::new(l.dim, cfg.n);
        let cap = cfg.cap.unwrap_or_else(|| l.default_velocity_cap());
        Ok(Context {
            l,
            grid,
            tau: cfg.tau,
            cap,
        })
    }

    fn costs(&self, omega: &OneFormSpec) -> Result<EdgeCostMatrix, RunError> {
        EdgeCostMatrix::build(&self.l, omega, &self.grid, self.tau, self.cap)
            .map_err(stage_err("edge costs"))
    }

    fn kam_tol(&self, cfg: &RunConfig) -> f64 {
        cfg.tolerances.kam_tol.unwrap_or(1e-6)
    }

    fn kam_max_iter(&self, cfg: &RunConfig) -> usize {
        cfg.tolerances.kam_max_iter.unwrap_or(20_000)
    }

    fn lp_max_iter(&self, cfg: &RunConfig) -> usize {
        cfg.tolerances.lp_max_iter.unwrap_or(200_000)
    }
}

fn require_h(cfg: &RunConfig) -> Result<Point, RunError> {
    cfg.h
        .ok_or_else(|| RunError::Setup("this command requires an h target".into()))
}

fn scan_targets_1d(values: &[f64]) -> Vec<Point> {
    values.iter().map(|&v| [v, 0.0]).collect()
}

fn scan_targets_grid(values: &[f64]) -> Vec<Point> {
    let mut out = Vec::with_capacity(values.len() * values.len());
    for &a in values {
        for &b in values {
            out.push([a, b]);
        }
    }
    out
}

/// Necessary reachability bounds for mean velocities: per-axis spans and the
/// Euclidean radius of the lifted displacement set.
fn reach_bounds(costs: &EdgeCostMatrix) -> (Point, f64) {
    let mut axis: Point = [0.0; 2];
    let mut radius = 0.0f64;
    for e in &costs.edges {
        for a in 0..2 {
            axis[a] = axis[a].max(e.disp[a].abs() / costs.tau);
        }
        radius = radius.max(norm(&e.disp) / costs.tau);
    }
    (axis, radius)
}

fn reachable(costs: &EdgeCostMatrix, axis: &Point, radius: f64, h: &Point) -> bool {
    (0..costs.grid.dim).all(|a| h[a].abs() <= axis[a] + 1e-9) && norm(h) <= radius + 1e-9
}

fn point_row(p: &Point) -> [String; 2] {
    [fmt(p[0]), fmt(p[1])]
}

fn cycles_json(cycles: &[Cycle]) -> Value {
    Value::Array(
        cycles
            .iter()
            .map(|c| {
                json!({
                    "edges": c.edges,
                    "mass": c.mass,
                    "class": c.class,
                })
            })
            .collect(),
    )
}

fn singularity_json(rep: &SingularityReport) -> Value {
    json!({
        "h": rep.h,
        "verdict": rep.verdict.to_string(),
        "flat_t": [rep.flat_t.0, rep.flat_t.1],
        "scanned_t": rep.scanned_t,
        "min_support_speed": rep.min_support_speed,
        "max_support_speed": rep.max_support_speed,
    })
}

fn theorem_json(rep: &TheoremReport) -> Value {
    json!({
        "h": rep.h,
        "verdict": rep.verdict.to_string(),
        "failures": rep.failures,
        "singularity": singularity_json(&rep.singularity),
        "flat": rep.flat,
        "c": rep.c,
        "lambda": rep.lambda,
        "beta_h": rep.beta_h,
        "aubry_nodes": rep.aubry_nodes,
        "mather_nodes": rep.mather_nodes,
        "hausdorff": rep.hausdorff,
        "cycles": cycles_json(&rep.cycles),
        "residue": rep.residue,
    })
}

/// Run one command against a parsed config, writing artifacts under
/// `out_root`. `config_echo` is the patched config document for the manifest.
pub fn execute(
    command: Command,
    cfg: &RunConfig,
    config_echo: &Value,
    out_root: &Path,
) -> Result<Outcome, RunError> {
    let mut out = OutDir::create(out_root)?;
    let mut stages: Vec<StageTime> = Vec::new();
    let started = Instant::now();
    let result = dispatch(command, cfg, &mut out, &mut stages);
    match result {
        Ok(outcome) => {
            stages.push(StageTime {
                stage: "total".into(),
                seconds: started.elapsed().as_secs_f64(),
            });
            out.write_manifest(
                command.name(),
                config_echo,
                &stages,
                outcome.ok,
                &outcome.messages,
            )?;
            Ok(outcome)
        }
        Err(err) => {
            stages.push(StageTime {
                stage: "total".into(),
                seconds: started.elapsed().as_secs_f64(),
            });
            let message = err.to_string();
            out.write_manifest(command.name(), config_echo, &stages, false, &[message])?;
            Err(err)
        }
    }
}

fn timed<T>(stages: &mut Vec<StageTime>, name: &str, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let value = f();
    stages.push(StageTime {
        stage: name.into(),
        seconds: t0.elapsed().as_secs_f64(),
    });
    value
}

fn dispatch(
    command: Command,
    cfg: &RunConfig,
    out: &mut OutDir,
    stages: &mut Vec<StageTime>,
) -> Result<Outcome, RunError> {
    match command {
        Command::Alpha => run_alpha(cfg, out, stages),
        Command::Beta => run_beta(cfg, out, stages),
        Command::Aubry => run_aubry(cfg, out, stages),
        Command::Mather => run_mather(cfg, out, stages),
        Command::Flats => run_flats(cfg, out, stages),
        Command::Singular => run_singular(cfg, out, stages),
        Command::VerifyTheorem => run_verify(cfg, out, stages),
        Command::LemmaSuite => run_lemmas(cfg, out, stages),
    }
}

fn run_alpha(
    cfg: &RunConfig,
    out: &mut OutDir,
    stages: &mut Vec<StageTime>,
) -> Result<Outcome, RunError> {
    let ctx = Context::new(cfg)?;
    let scan = cfg
        .c_scan
        .ok_or_else(|| RunError::Setup("alpha requires c_scan".into()))?;
    let values = scan.values();
    let targets = if ctx.l.dim == 1 {
        scan_targets_1d(&values)
    } else {
        scan_targets_grid(&values)
    };
    let alphas = timed(stages, "alpha scan", || -> Result<Vec<f64>, RunError> {
        targets
            .iter()
            .map(|&c| {
                let costs = ctx.costs(&OneFormSpec::constant(c))?;
                Ok(-costs.min_cycle_mean() / ctx.tau)
            })
            .collect()
    })?;
    let rows: Vec<Vec<String>> = targets
        .iter()
        .zip(&alphas)
        .map(|(c, a)| {
            let [c1, c2] = point_row(c);
            vec![c1, c2, fmt(*a)]
        })
        .collect();
    out.write_csv("alpha.csv", &["c1", "c2", "alpha"], &rows)?;
    Ok(Outcome {
        ok: true,
        messages: Vec::new(),
        data: OutcomeData::Alpha { targets, alphas },
    })
}

fn beta_targets(cfg: &RunConfig, costs: &EdgeCostMatrix) -> Result<Vec<Point>, RunError> {
    let scan = cfg
        .h_scan
        .ok_or_else(|| RunError::Setup("beta requires h_scan".into()))?;
    let values = scan.values();
    let raw = if cfg.ray {
        let h = require_h(cfg)?;
        values.iter().map(|&t| [t * h[0], t * h[1]]).collect()
    } else if costs.grid.dim == 1 {
        scan_targets_1d(&values)
    } else {
        scan_targets_grid(&values)
    };
    let (axis, radius) = reach_bounds(costs);
    let targets: Vec<Point> = raw
        .into_iter()
        .filter(|h: &Point| reachable(costs, &axis, radius, h))
        .collect();
    if targets.is_empty() {
        return Err(RunError::Setup("no scan target is reachable".into()));
    }
    Ok(targets)
}

fn run_beta(
    cfg: &RunConfig,
    out: &mut OutDir,
    stages: &mut Vec<StageTime>,
) -> Result<Outcome, RunError> {
    let ctx = Context::new(cfg)?;
    let costs = timed(stages, "edge costs", || ctx.costs(&OneFormSpec::zero()))?;
    let targets = beta_targets(cfg, &costs)?;
    let scan = timed(stages, "beta scan", || {
        beta_scan(&costs, &targets, ctx.lp_max_iter(cfg))
    })
    .map_err(stage_err("beta scan"))?;
    let rows: Vec<Vec<String>> = scan
        .targets
        .iter()
        .zip(&scan.betas)
        .map(|(h, b)| {
            let [h1, h2] = point_row(h);
            vec![h1, h2, fmt(*b)]
        })
        .collect();
    out.write_csv("beta.csv", &["h1", "h2", "beta"], &rows)?;
    Ok(Outcome {
        ok: true,
        messages: Vec::new(),
        data: OutcomeData::Beta { scan },
    })
}

fn run_aubry(
    cfg: &RunConfig,
    out: &mut OutDir,
    stages: &mut Vec<StageTime>,
) -> Result<Outcome, RunError> {
    let ctx = Context::new(cfg)?;
    let c = cfg
        .c
        .ok_or_else(|| RunError::Setup("aubry requires a c target".into()))?;
    let costs = timed(stages, "edge costs", || {
        ctx.costs(&OneFormSpec::constant(c))
    })?;
    let sol = timed(stages, "weak KAM", || {
        solve_critical(&costs, ctx.kam_tol(cfg), ctx.kam_max_iter(cfg))
    });
    let n_min = cfg.tolerances.n_min.unwrap_or(4 * cfg.n);
    let n_max = cfg.tolerances.n_max.unwrap_or(16 * cfg.n);
    let diag = timed(stages, "Peierls barrier", || {
        peierls_diag(&costs, sol.lambda, n_min, n_max)
    });
    let tol_a = cfg
        .tolerances
        .tol_a
        .unwrap_or_else(|| default_tol_a(ctx.grid.delta(), ctx.tau));
    let est = aubry_set(&diag, tol_a);
    let in_aubry: Vec<bool> = {
        let mut mask = vec![false; costs.node_count()];
        for &v in &est.nodes {
            mask[v] = true;
        }
        mask
    };
    let rows: Vec<Vec<String>> = (0..costs.node_count())
        .map(|v| {
            let x = ctx.grid.coords(v);
            let [x1, x2] = point_row(&x);
            vec![
                v.to_string(),
                x1,
                x2,
                fmt(diag.values[v]),
                (in_aubry[v] as u8).to_string(),
            ]
        })
        .collect();
    out.write_csv("aubry.csv", &["node", "x1", "x2", "h_diag", "in_aubry"], &rows)?;
    let mut messages = Vec::new();
    if !sol.converged {
        messages.push(format!(
            "weak KAM iteration stopped at residual {:.3e}",
            sol.residual
        ));
    }
    if diag.window_warning {
        messages.push("Peierls window may be too short".into());
    }
    Ok(Outcome {
        ok: sol.converged,
        messages,
        data: OutcomeData::Aubry {
            costs,
            sol,
            diag,
            est,
        },
    })
}

fn run_mather(
    cfg: &RunConfig,
    out: &mut OutDir,
    stages: &mut Vec<StageTime>,
) -> Result<Outcome, RunError> {
    let ctx = Context::new(cfg)?;
    let h = require_h(cfg)?;
    let costs = timed(stages, "edge costs", || ctx.costs(&OneFormSpec::zero()))?;
    let lp = build_lp(&costs, h).map_err(stage_err("holonomic LP"))?;
    let mu = timed(stages, "minimizing measure", || {
        solve_lp(&costs, &lp, ctx.lp_max_iter(cfg))
    })
    .map_err(stage_err("minimizing measure"))?;
    let mass_tol = cfg
        .tolerances
        .mass_tol
        .unwrap_or_else(|| amlab_core::mather::default_mass_tol(costs.edges.len()));
    let support = mather_support(&costs, &mu, mass_tol);
    let face = timed(stages, "optimal face", || {
        face_support(&costs, &lp, &mu, ctx.lp_max_iter(cfg))
    })
    .map_err(stage_err("optimal face"))?;
    let rows: Vec<Vec<String>> = face
        .iter()
        .map(|&j| {
            let e = &costs.edges[j];
            vec![
                e.source.to_string(),
                e.target.to_string(),
                e.lift[0].to_string(),
                e.lift[1].to_string(),
                fmt(mu.masses[j]),
            ]
        })
        .collect();
    out.write_csv(
        "mather_edges.csv",
        &["source", "target", "lift1", "lift2", "mass"],
        &rows,
    )?;
    let mut messages = Vec::new();
    if support.warning {
        messages.push(format!(
            "cycle decomposition residue {:.3e}",
            support.residue
        ));
    }
    Ok(Outcome {
        ok: !support.warning,
        messages,
        data: OutcomeData::Mather {
            costs,
            mu,
            support,
            face,
        },
    })
}

fn run_flats(
    cfg: &RunConfig,
    out: &mut OutDir,
    stages: &mut Vec<StageTime>,
) -> Result<Outcome, RunError> {
    let ctx = Context::new(cfg)?;
    let h = require_h(cfg)?;
    if norm(&h) < 1e-12 {
        return Err(RunError::Setup("flats requires a nonzero h".into()));
    }
    let scan = cfg
        .h_scan
        .ok_or_else(|| RunError::Setup("flats requires h_scan (ray parameter t)".into()))?;
    let costs = timed(stages, "edge costs", || ctx.costs(&OneFormSpec::zero()))?;
    let (axis, radius) = reach_bounds(&costs);
    let ts: Vec<f64> = scan
        .values()
        .into_iter()
        .filter(|&t| t >= 0.0 && reachable(&costs, &axis, radius, &[t * h[0], t * h[1]]))
        .collect();
    if ts.len() < 3 {
        return Err(RunError::Setup(
            "flats needs at least 3 reachable ray points".into(),
        ));
    }
    let targets: Vec<Point> = ts.iter().map(|&t| [t * h[0], t * h[1]]).collect();
    let beta = timed(stages, "beta scan", || {
        beta_scan(&costs, &targets, ctx.lp_max_iter(cfg))
    })
    .map_err(stage_err("beta scan"))?;
    let samples: Vec<SamplePoint> = ts
        .iter()
        .zip(&beta.betas)
        .map(|(&t, &b)| SamplePoint::new([t, 0.0], b))
        .collect();
    let f = convexify(&samples, 1).map_err(stage_err("ray convexification"))?;
    let tol_flat = cfg
        .tolerances
        .tol_flat
        .unwrap_or_else(|| (ctx.grid.delta() + ctx.tau) / 20.0);
    let flat = radial_flat(&f, &[1.0, 0.0], scan.step, tol_flat)
        .map_err(stage_err("radial flat"))?;
    out.write_json(
        "flats.json",
        &json!({
            "h": h,
            "t": ts,
            "beta": beta.betas,
            "tol_flat": tol_flat,
            "flat_t": [flat.t_min, flat.t_max],
        }),
    )?;
    Ok(Outcome {
        ok: true,
        messages: Vec::new(),
        data: OutcomeData::Flats {
            ts,
            betas: beta.betas,
            flat,
        },
    })
}

fn singular_options(cfg: &RunConfig, costs: &EdgeCostMatrix) -> SingularityOptions {
    let mut opts = SingularityOptions::defaults(costs);
    let t = &cfg.tolerances;
    if let Some(v) = t.t_step {
        opts.t_step = v;
    }
    if let Some(v) = t.tol_flat {
        opts.tol_flat = v;
    }
    if let Some(v) = t.v_tol {
        opts.v_tol = v;
    }
    if let Some(v) = t.mass_tol {
        opts.mass_tol = v;
    }
    if let Some(v) = t.lp_max_iter {
        opts.lp_max_iter = v;
    }
    opts
}

fn run_singular(
    cfg: &RunConfig,
    out: &mut OutDir,
    stages: &mut Vec<StageTime>,
) -> Result<Outcome, RunError> {
    let ctx = Context::new(cfg)?;
    let h = require_h(cfg)?;
    let costs = timed(stages, "edge costs", || ctx.costs(&OneFormSpec::zero()))?;
    let opts = singular_options(cfg, &costs);
    let report = timed(stages, "singularity scan", || {
        is_singular(&costs, h, &opts)
    })
    .map_err(stage_err("singularity scan"))?;
    out.write_json(
        "theorem_report.json",
        &json!({
            "h": h,
            "verdict": report.verdict.to_string(),
            "singularity": singularity_json(&report),
        }),
    )?;
    let ok = report.verdict != Verdict::Undetermined;
    let messages = if ok {
        Vec::new()
    } else {
        vec!["support speeds fall inside the undetermined band".into()]
    };
    Ok(Outcome {
        ok,
        messages,
        data: OutcomeData::Singular { report },
    })
}

fn theorem_tols(cfg: &RunConfig, costs: &EdgeCostMatrix) -> TheoremTolerances {
    let mut tols = TheoremTolerances::defaults(costs);
    let t = &cfg.tolerances;
    if let Some(v) = t.t_step {
        tols.t_step = v;
    }
    if let Some(v) = t.patch_step {
        tols.patch_step = v;
    }
    if let Some(v) = t.patch_radius {
        tols.patch_radius = v;
    }
    if let Some(v) = t.tol_flat {
        tols.tol_flat = v;
    }
    if let Some(v) = t.tol_a {
        tols.tol_a = v;
    }
    if let Some(v) = t.hausdorff {
        tols.hausdorff = v;
    }
    if let Some(v) = t.v_tol {
        tols.v_tol = v;
    }
    if let Some(v) = t.mass_tol {
        tols.mass_tol = v;
    }
    if let Some(v) = t.lp_max_iter {
        tols.lp_max_iter = v;
    }
    if let Some(v) = t.kam_tol {
        tols.kam_tol = v;
    }
    if let Some(v) = t.kam_max_iter {
        tols.kam_max_iter = v;
    }
    if let Some(v) = t.n_min {
        tols.n_min = v;
    }
    if let Some(v) = t.n_max {
        tols.n_max = v;
    }
    tols
}

fn run_verify(
    cfg: &RunConfig,
    out: &mut OutDir,
    stages: &mut Vec<StageTime>,
) -> Result<Outcome, RunError> {
    let ctx = Context::new(cfg)?;
    let h = require_h(cfg)?;
    let costs = timed(stages, "edge costs", || ctx.costs(&OneFormSpec::zero()))?;
    let tols = theorem_tols(cfg, &costs);
    let report = timed(stages, "verify theorem", || {
        verify_theorem(&ctx.l, &costs, h, ctx.cap, &tols)
    })
    .map_err(stage_err("verify theorem"))?;
    out.write_json("theorem_report.json", &theorem_json(&report))?;
    let ok = matches!(
        report.verdict,
        TheoremVerdict::Passed | TheoremVerdict::SingularSkipped
    );
    Ok(Outcome {
        ok,
        messages: report.failures.clone(),
        data: OutcomeData::Verify { costs, report },
    })
}

fn run_lemmas(
    cfg: &RunConfig,
    out: &mut OutDir,
    stages: &mut Vec<StageTime>,
) -> Result<Outcome, RunError> {
    let seed = cfg.seed.unwrap_or(0);
    let report = timed(stages, "lemma suite", || run_suite(seed, 100));
    out.write_json(
        "lemma_report.json",
        &serde_json::to_value(&report).expect("serializable"),
    )?;
    let mut messages = vec![format!(
        "{} instances, max biconjugation error {:.3e}, {} faces, {} extensions",
        report.instances_1d + report.instances_2d,
        report.max_biconjugation_error,
        report.faces_checked,
        report.extensions_checked
    )];
    messages.extend(report.failures.iter().cloned());
    Ok(Outcome {
        ok: report.passed,
        messages,
        data: OutcomeData::Lemmas { report },
    })
}
