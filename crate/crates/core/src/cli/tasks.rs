use std::f64::consts::{PI, SQRT_2};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{
    Coupling, FreeParameterConfig, OutputConfig, ProtocolConfig, ScenarioConfig, SchemaError, StageTimingConfig,
    SweepParameter, Task,
};
use super::output::{self, fmt_num, summary_table, trajectory_table, Table};
use super::CliError;
use crate::dynamics::{self, DEFAULT_COARSE_POINTS};
use crate::effective::{self, EffectiveOptions};
use crate::network::SystemSpec;
use crate::protocol::{self, CalibrationResult, EntanglementReport, PlanConstraints, StageTiming, WScan};
use crate::spectral;

const DEFAULT_POINTS: usize = 2001;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub task: Task,
    /// Stem for output file names.
    pub name: String,
    /// Overrides `output.path`.
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    fn merge(&mut self, other: RunOutcome) {
        self.files.extend(other.files);
        self.summary.extend(other.summary);
        self.warnings.extend(other.warnings);
    }

    fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    out: &'a OutputConfig,
    dir: PathBuf,
    stem: String,
}

impl Ctx<'_> {
    fn path(&self, suffix: &str, ext: &str) -> PathBuf {
        let mut name = self.stem.clone();
        if !suffix.is_empty() {
            name.push('_');
            name.push_str(suffix);
        }
        self.dir.join(format!("{name}.{ext}"))
    }

    fn ext(&self) -> &'static str {
        match self.out.format {
            super::config::OutputFormat::Csv => "csv",
            super::config::OutputFormat::Json => "json",
        }
    }

    fn write_table(&self, table: &Table, suffix: &str, outcome: &mut RunOutcome) -> Result<(), CliError> {
        let path = self.path(suffix, self.ext());
        table.write(&path, self.out.format)?;
        outcome.files.push(path);
        Ok(())
    }

    /// Resonance value from `lambda_mode_index`, counted from the top.
    fn lambda(&self) -> Result<Option<f64>, CliError> {
        let Some(k) = self.cfg.task_params.lambda_mode_index else {
            return Ok(None);
        };
        let decomp = spectral::network_spectrum(&self.cfg.build_network()?)?;
        Ok(Some(decomp.eigenvalue(decomp.descending_index(k)?)))
    }

    fn spec(&self) -> Result<SystemSpec, CliError> {
        Ok(self.cfg.build_spec(self.lambda()?)?)
    }
}

/// Executes one scenario, fanning out over `task_params.sweep` if present.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let dir = opts
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.path));
    let Some(sweep) = &cfg.task_params.sweep else {
        let ctx = Ctx {
            cfg,
            out: &cfg.output,
            dir,
            stem: opts.name.clone(),
        };
        return run_task(&ctx, opts.task);
    };

    let index = cfg
        .terminals
        .iter()
        .position(|t| t.label == sweep.terminal)
        .expect("validated sweep terminal");
    let results: Vec<Result<RunOutcome, CliError>> = sweep
        .values
        .par_iter()
        .map(|&v| {
            let mut variant = cfg.clone();
            variant.task_params.sweep = None;
            let param = match sweep.parameter {
                SweepParameter::Omega => {
                    variant.terminals[index].omega = Some(v);
                    "omega"
                }
                SweepParameter::EpsilonXi => {
                    variant.terminals[index].epsilon_xi = Coupling::Real(v);
                    "epsilon_xi"
                }
            };
            let ctx = Ctx {
                cfg: &variant,
                out: &cfg.output,
                dir: dir.clone(),
                stem: format!("{}_{}_{}_{}", opts.name, sweep.terminal, param, v),
            };
            let mut outcome = RunOutcome::default();
            outcome.line(format!("== {} {} = {v}", sweep.terminal, param));
            outcome.merge(run_task(&ctx, opts.task)?);
            Ok(outcome)
        })
        .collect();
    let mut total = RunOutcome::default();
    for r in results {
        total.merge(r?);
    }
    Ok(total)
}

fn run_task(ctx: &Ctx<'_>, task: Task) -> Result<RunOutcome, CliError> {
    match task {
        Task::Spectrum => spectrum(ctx),
        Task::Simulate => simulate(ctx),
        Task::Calibrate => calibrate(ctx).map(|(_, o)| o),
        Task::Route => route(ctx),
        Task::Plan => plan(ctx),
        Task::Entangle => entangle(ctx),
    }
}

fn spectrum(ctx: &Ctx<'_>) -> Result<RunOutcome, CliError> {
    let network = ctx.cfg.build_network()?;
    let decomp = spectral::network_spectrum(&network)?;
    let n = decomp.dim();
    let class_of = |i: usize| {
        decomp
            .degeneracy_classes()
            .iter()
            .position(|c| c.contains(&i))
            .unwrap_or(0)
    };
    let mut columns = vec![
        "k".to_string(),
        "index".into(),
        "eigenvalue".into(),
        "class".into(),
        "multiplicity".into(),
    ];
    for t in &ctx.cfg.terminals {
        columns.push(format!("g_{}_re", t.label));
        columns.push(format!("g_{}_im", t.label));
    }
    let mut table = Table::new(columns);
    let mut out = RunOutcome::default();
    out.line(format!("spectrum of {n}-node network (k = 1 is the top eigenvalue)"));
    out.line(format!("{:>4} {:>18} {:>6} {:>5}", "k", "eigenvalue", "class", "mult"));
    for k in 1..=n {
        let i = decomp.descending_index(k)?;
        let class = class_of(i);
        let mult = decomp.degeneracy_classes()[class].len();
        let mut row = vec![
            k.to_string(),
            i.to_string(),
            fmt_num(decomp.eigenvalue(i)),
            class.to_string(),
            mult.to_string(),
        ];
        for t in &ctx.cfg.terminals {
            let g = decomp.eigenvectors()[(t.node - 1, i)];
            row.push(fmt_num(g.re));
            row.push(fmt_num(g.im));
        }
        table.push(row);
        out.line(format!("{k:>4} {:>18.12} {class:>6} {mult:>5}", decomp.eigenvalue(i)));
    }
    ctx.write_table(&table, "spectrum", &mut out)?;
    Ok(out)
}

fn pair_labels(ctx: &Ctx<'_>) -> Result<(String, String), CliError> {
    Ok((ctx.cfg.source()?.to_string(), ctx.cfg.target()?.to_string()))
}

fn calibration_lines(cal: &CalibrationResult, out: &mut RunOutcome) {
    let ts = cal.adjusted_spec.terminals();
    let (s, d) = (&ts[0], &ts[1]);
    out.line(format!("regime: {:?}", cal.regime));
    if let Some(m) = cal.resonance_mode {
        out.line(format!("resonant mode: ascending index {m}"));
    }
    out.line(format!(
        "{}: omega = {:.12}, |eps xi| = {:.6e}",
        s.label(),
        s.field(),
        s.coupling().norm()
    ));
    out.line(format!(
        "{}: omega = {:.12}, |eps xi| = {:.6e}",
        d.label(),
        d.field(),
        d.coupling().norm()
    ));
    out.line(format!(
        "coupling ratio |xi_{}/xi_{}| = {:.6}",
        d.label(),
        s.label(),
        (d.coupling() / s.coupling()).norm()
    ));
    out.line(format!("predicted transfer time = {:.6}", cal.predicted_time));
    out.line(format!(
        "off-diagonal magnitudes = {:?}, diagonal residual = {:.3e}",
        cal.diagnostics.off_diagonal_magnitudes, cal.diagnostics.diagonal_residual
    ));
    out.warnings.extend(cal.warnings.iter().map(ToString::to_string));
}

/// Calibrates the configured `(source, target)` pair.
fn calibrate_pair(ctx: &Ctx<'_>, spec: &SystemSpec) -> Result<CalibrationResult, CliError> {
    let (s, d) = pair_labels(ctx)?;
    if spec.terminals().len() != 2 {
        return Err(SchemaError::new("terminals", "calibration needs exactly two terminals").into());
    }
    let pair = spec.restrict(&[&s, &d])?;
    let opts = EffectiveOptions::default();
    Ok(match ctx.lambda()? {
        Some(l) => protocol::calibrate_resonant(&pair, l, &opts)?,
        None => {
            let free = ctx
                .cfg
                .task_params
                .free_parameter
                .unwrap_or(FreeParameterConfig::SourceField);
            protocol::calibrate_nonresonant(&pair, free.into(), &opts)?
        }
    })
}

fn calibrate(ctx: &Ctx<'_>) -> Result<(CalibrationResult, RunOutcome), CliError> {
    let spec = ctx.spec()?;
    let cal = calibrate_pair(ctx, &spec)?;
    let mut out = RunOutcome::default();
    calibration_lines(&cal, &mut out);
    let ts = cal.adjusted_spec.terminals();
    let mut entries = vec![("regime".to_string(), format!("{:?}", cal.regime).to_lowercase())];
    for t in ts {
        entries.push((format!("omega_{}", t.label()), fmt_num(t.field())));
        entries.push((format!("epsilon_xi_{}_re", t.label()), fmt_num(t.coupling().re)));
        entries.push((format!("epsilon_xi_{}_im", t.label()), fmt_num(t.coupling().im)));
    }
    entries.push((
        "coupling_ratio".into(),
        fmt_num((ts[1].coupling() / ts[0].coupling()).norm()),
    ));
    entries.push(("predicted_time".into(), fmt_num(cal.predicted_time)));
    entries.push(("diagonal_residual".into(), fmt_num(cal.diagnostics.diagonal_residual)));
    ctx.write_table(&summary_table(&entries), "calibration", &mut out)?;
    Ok((cal, out))
}

/// Rough transfer time of the configured pair, used for default windows.
fn natural_time(ctx: &Ctx<'_>, spec: &SystemSpec) -> Result<f64, CliError> {
    let (s, d) = pair_labels(ctx)?;
    let pair = spec.restrict(&[&s, &d])?;
    let opts = EffectiveOptions::default();
    if let Some(l) = ctx.lambda()? {
        let h = effective::effective_resonant(&pair, l, &opts)?;
        let b = h.off_diagonal_magnitudes()[0];
        return Ok(PI / (SQRT_2 * b));
    }
    let h = effective::effective_nonresonant(&pair, &opts)?;
    Ok(PI / (2.0 * h.matrix[(0, 1)].norm()))
}

fn emit_trajectory(
    ctx: &Ctx<'_>,
    spec: &SystemSpec,
    source: &str,
    t_max: f64,
    title: &str,
    out: &mut RunOutcome,
) -> Result<dynamics::Trajectory, CliError> {
    let n = ctx.cfg.task_params.n_points.unwrap_or(DEFAULT_POINTS);
    let tr = dynamics::trajectory(spec, source, t_max, n)?;
    ctx.write_table(&trajectory_table(&tr, ctx.out.include_amplitudes), "", out)?;
    if ctx.out.plot {
        let cols: Vec<usize> = (0..spec.terminals().len()).collect();
        let path = ctx.path("", "svg");
        output::write_bytes(&path, output::trajectory_svg(&tr, &cols, title).as_bytes())?;
        out.files.push(path);
    }
    let h = crate::network::full_hamiltonian(spec);
    out.line(format!(
        "trajectory: {n} points on [0, {t_max:.6}], norm drift {:.2e}, energy drift {:.2e}",
        tr.norm_drift(),
        tr.energy_drift(&h)
    ));
    Ok(tr)
}

fn simulate(ctx: &Ctx<'_>) -> Result<RunOutcome, CliError> {
    let mut out = RunOutcome::default();
    let mut spec = ctx.spec()?;
    let (s, d) = pair_labels(ctx)?;
    let mut estimate = None;
    if ctx.cfg.task_params.calibrate {
        let cal = calibrate_pair(ctx, &spec)?;
        calibration_lines(&cal, &mut out);
        estimate = Some(cal.predicted_time);
        spec = cal.adjusted_spec;
    }
    let t_max = match ctx.cfg.task_params.t_max {
        Some(t) => t,
        None => {
            let base = match estimate {
                Some(t) => t,
                None => natural_time(ctx, &spec)?,
            };
            let factor = if ctx.lambda()?.is_some() { 2.5 } else { 2.0 };
            factor * base
        }
    };
    emit_trajectory(ctx, &spec, &s, t_max, &ctx.stem, &mut out)?;
    let peak = dynamics::peak_transfer(&spec, &s, &d, t_max, DEFAULT_COARSE_POINTS)?;
    out.line(format!(
        "peak {s} -> {d}: probability {:.9} at t = {:.6}",
        peak.value, peak.time
    ));
    Ok(out)
}

fn route(ctx: &Ctx<'_>) -> Result<RunOutcome, CliError> {
    let mut out = RunOutcome::default();
    let spec = ctx.spec()?;
    let (s, d) = pair_labels(ctx)?;
    let report = protocol::route(&spec, &s, &d, &EffectiveOptions::default())?;
    out.line(format!(
        "route {s} -> {d}: omega = {:.6}, calibrated |eps xi_{s}| = {:.6e}",
        report.adjusted_spec.terminal(&s)?.field(),
        report.adjusted_spec.terminal(&s)?.coupling().norm()
    ));
    let t = report.calibration.predicted_time;
    out.line(format!(
        "predicted transfer time {t:.6}; min detuning to users {:.4e}, to spectrum {:.4e}; ambiguity floor {:.4e}",
        report.min_user_detuning, report.min_spectrum_detuning, report.ambiguity_floor
    ));
    out.warnings.extend(report.warnings.iter().map(ToString::to_string));
    let t_max = ctx.cfg.task_params.t_max.unwrap_or(2.0 * t);
    emit_trajectory(ctx, &report.adjusted_spec, &s, t_max, &ctx.stem, &mut out)?;
    for (label, peak) in protocol::crosstalk_peaks(&report.adjusted_spec, &s, t_max, DEFAULT_COARSE_POINTS)? {
        out.line(format!(
            "peak population of {label}: {:.9} at t = {:.6}",
            peak.value, peak.time
        ));
    }
    Ok(out)
}

fn plan(ctx: &Ctx<'_>) -> Result<RunOutcome, CliError> {
    let mut out = RunOutcome::default();
    let network = ctx.cfg.build_network()?;
    let source = ctx.cfg.source()?;
    let src = ctx
        .cfg
        .terminals
        .iter()
        .find(|t| t.label == source)
        .expect("validated source");
    let users: Vec<(&str, usize)> = ctx
        .cfg
        .terminals
        .iter()
        .filter(|t| t.label != source)
        .map(|t| (t.label.as_str(), t.node))
        .collect();
    let c = ctx.cfg.task_params.constraints.unwrap_or_default();
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| {
            SchemaError::new(
                format!("task_params.constraints.{name}"),
                "required for task = \"plan\"",
            )
        })
    };
    let constraints = PlanConstraints {
        min_mutual_sep: need(c.min_mutual_sep, "min_mutual_sep")?,
        min_spectrum_sep: need(c.min_spectrum_sep, "min_spectrum_sep")?,
        max_time: c.max_time,
        source_node: src.node,
        coupling: c.coupling.unwrap_or(src.epsilon_xi.value().norm()),
    };
    let plan = protocol::frequency_plan(&network, &users, &constraints)?;
    let mut table = Table::new(["label", "node", "omega", "predicted_time"]);
    for u in &plan.users {
        out.line(format!(
            "{}: node {}, omega = {:.6}, predicted time {:.4}",
            u.label, u.node, u.omega, u.predicted_time
        ));
        table.push(vec![
            u.label.clone(),
            u.node.to_string(),
            fmt_num(u.omega),
            fmt_num(u.predicted_time),
        ]);
    }
    out.line(format!(
        "min separation from spectrum {:.4e}, between users {:.4e}, worst time {:.4}",
        plan.min_eigenvalue_separation, plan.min_mutual_separation, plan.worst_predicted_time
    ));
    ctx.write_table(&table, "plan", &mut out)?;
    Ok(out)
}

fn report_lines(r: &EntanglementReport, out: &mut RunOutcome) -> Vec<(String, String)> {
    out.line(format!(
        "{}: fidelity {:.9}, success {}",
        r.protocol.name(),
        r.achieved_fidelity,
        r.success
    ));
    out.line(format!("target times {:?}", r.target_times));
    out.line(format!("relative phases {:?}", r.optimal_phases));
    for (label, p) in &r.populations {
        out.line(format!("population {label}: {p:.9}"));
    }
    if let Some(n) = &r.note {
        out.line(format!("note: {n}"));
    }
    out.warnings.extend(r.warnings.iter().map(ToString::to_string));

    let mut entries = vec![
        ("protocol".to_string(), r.protocol.name().to_string()),
        ("fidelity".into(), fmt_num(r.achieved_fidelity)),
        ("success".into(), r.success.to_string()),
    ];
    for (i, t) in r.target_times.iter().enumerate() {
        entries.push((format!("time_{i}"), fmt_num(*t)));
    }
    for (i, p) in r.optimal_phases.iter().enumerate() {
        entries.push((format!("phase_{i}"), fmt_num(*p)));
    }
    for (label, p) in &r.populations {
        entries.push((format!("p_{label}"), fmt_num(*p)));
    }
    entries
}

fn entangle(ctx: &Ctx<'_>) -> Result<RunOutcome, CliError> {
    let protocol_kind = ctx
        .cfg
        .task_params
        .protocol
        .ok_or_else(|| SchemaError::new("task_params.protocol", "required for task = \"entangle\""))?;
    let mut out = RunOutcome::default();
    let spec = ctx.spec()?;
    let opts = EffectiveOptions::default();
    let report = match protocol_kind {
        ProtocolConfig::Bell => {
            let cal = calibrate_pair(ctx, &spec)?;
            calibration_lines(&cal, &mut out);
            protocol::bell_protocol(&cal)?
        }
        ProtocolConfig::WNonresonant => {
            let h = effective::effective_multiuser(&spec, &opts)?;
            let weakest = h
                .off_diagonal_magnitudes()
                .into_iter()
                .filter(|x| *x > 0.0)
                .fold(f64::INFINITY, f64::min);
            let t_max = match ctx.cfg.task_params.t_max {
                Some(t) => t,
                None if weakest.is_finite() => 2.0 * PI / weakest,
                None => return Err(crate::error::Error::NoNonresonantChannel(0.0).into()),
            };
            let mut scan = WScan::new(t_max);
            if let Some(n) = ctx.cfg.task_params.n_points {
                scan.n_points = n;
            }
            protocol::w_nonresonant_protocol(&spec, &scan, &opts)?
        }
        ProtocolConfig::WResonant => {
            let l = ctx.lambda()?.ok_or_else(|| {
                SchemaError::new(
                    "task_params.lambda_mode_index",
                    "required for protocol = \"w_resonant\"",
                )
            })?;
            let timing = match ctx.cfg.task_params.stage_timing {
                StageTimingConfig::Analytic => StageTiming::Analytic,
                StageTimingConfig::Refined => StageTiming::Refined,
            };
            protocol::w_resonant_protocol(&spec, l, timing, &opts)?
        }
    };
    let entries = report_lines(&report, &mut out);
    ctx.write_table(&summary_table(&entries), "entangle", &mut out)?;
    Ok(out)
}

/// Loads and runs a scenario file, deriving the output stem from its name.
pub fn run_file(path: &Path, task: Option<Task>, output_dir: Option<PathBuf>) -> Result<RunOutcome, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg = ScenarioConfig::from_toml_str(&text)?;
    let task = task
        .or(cfg.task)
        .ok_or_else(|| SchemaError::new("task", "missing; set it in the config or use a subcommand"))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    run_scenario(&cfg, &RunOptions { task, name, output_dir })
}
