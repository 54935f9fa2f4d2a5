use crate::args::*;
use crate::error::{CliError, CliResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rdoe_core::acpf::{
    audit_voltages, customer_powers, error_report_csv, feasibility_audit, linearization_error_report,
    passive_forecast, refined_point, solve_acpf, standard_scenarios, AuditReport, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use rdoe_core::lintopf::{
    assemble, solve_ddoe, trace_fr_2d, trace_region, AllocationPolicy, EnvelopeOptions, EnvelopeResult,
    FeasibleRegion, OperatingPoint, Polygon, QControl,
};
use rdoe_core::netmodel::NetworkModel;
use rdoe_core::robustrc::{self, sampled_worst_violation, solve_rdoe, RobustMode};
use rdoe_core::tsro::{tsro_solve, Termination, TsroOptions};
use rdoe_core::uncertainty::{Component, UncertaintyModel, UncertaintySpec};
use serde::Serialize;
use std::fs;
use std::path::Path;
use std::time::Instant;

pub fn load_network(arg: &str) -> CliResult<NetworkModel> {
    match arg.strip_prefix('@') {
        Some(name) => Ok(NetworkModel::bundled(name)?),
        None => {
            if !Path::new(arg).is_file() {
                return Err(CliError::Config(format!("network file '{arg}' does not exist")));
            }
            Ok(NetworkModel::load(arg)?)
        }
    }
}

fn load_spec(arg: &str) -> CliResult<UncertaintySpec> {
    match arg.strip_prefix('@') {
        Some(name) => Ok(UncertaintySpec::bundled(name)?),
        None => {
            if !Path::new(arg).is_file() {
                return Err(CliError::Config(format!("uncertainty file '{arg}' does not exist")));
            }
            Ok(UncertaintySpec::load(arg)?)
        }
    }
}

fn parse_allocation(s: &str) -> CliResult<AllocationPolicy> {
    match s {
        "equal" => Ok(AllocationPolicy::StrictlyEqual),
        "independent" => Ok(AllocationPolicy::Independent),
        _ => {
            let Some(list) = s.strip_prefix("weighted:") else {
                return Err(CliError::Config(format!(
                    "unknown allocation '{s}' (equal|independent|weighted:W1,W2,...)"
                )));
            };
            let weights = list
                .split(',')
                .map(|w| w.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Config(format!("bad weight list '{list}': {e}")))?;
            Ok(AllocationPolicy::Weighted { weights })
        }
    }
}

pub fn envelope_options(a: &EnvelopeArgs) -> CliResult<EnvelopeOptions> {
    let mut opts = EnvelopeOptions {
        direction: a.direction.parse()?,
        allocation: parse_allocation(&a.allocation)?,
        q_control: a.q_control.parse()?,
        ..EnvelopeOptions::default()
    };
    if let Some(tol) = a.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Config(format!("--tol must be positive, got {tol}")));
        }
        opts.solver.gap_tol = tol;
    }
    Ok(opts)
}

fn region(net: &NetworkModel) -> CliResult<FeasibleRegion> {
    let ls = assemble(net, &OperatingPoint::flat(net))?;
    Ok(FeasibleRegion::with_forecast(ls, net)?)
}

fn check_radius(name: &str, r: Option<f64>) -> CliResult<()> {
    match r {
        Some(r) if !(r >= 0.0 && r.is_finite()) => {
            Err(CliError::Config(format!("{name} must be finite and nonnegative, got {r}")))
        }
        _ => Ok(()),
    }
}

pub fn uncertainty_model(net: &NetworkModel, a: &UncertaintyArgs) -> CliResult<UncertaintyModel> {
    check_radius("--radius", a.radius)?;
    check_radius("--demand-radius", a.demand_radius)?;
    let mut spec = load_spec(&a.uncertainty)?;
    for (comp, norm, radius, flag) in [
        (Component::Impedance, a.norm, a.radius, "--norm/--radius"),
        (Component::P2, a.demand_norm, a.demand_radius, "--demand-norm/--demand-radius"),
    ] {
        if norm.is_none() && radius.is_none() {
            continue;
        }
        let c = spec
            .component_mut(comp)
            .ok_or_else(|| CliError::Config(format!("{flag} given but the uncertainty file has no {comp} set")))?;
        if let Some(n) = norm {
            c.ball.norm = n;
        }
        if let Some(r) = radius {
            c.ball.radius = r;
        }
    }
    Ok(spec.resolve(net)?)
}

fn parse_mode(s: &str) -> CliResult<RobustMode> {
    Ok(s.parse()?)
}

fn ensure_optimal(res: &EnvelopeResult) -> CliResult<()> {
    match CliError::from_status(res.status, &res.message) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn write(out: &Path, name: &str, contents: &str) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn timing_csv(rows: &[(&str, f64)]) -> String {
    let mut s = String::from("stage,seconds\n");
    for (stage, secs) in rows {
        s.push_str(&format!("{stage},{secs:.6}\n"));
    }
    s
}

fn write_envelope(out: &Path, res: &EnvelopeResult, wall_s: f64) -> CliResult<()> {
    let mut json = res.to_json();
    json.push('\n');
    write(out, "result.json", &json)?;
    write(out, "envelopes.csv", &res.to_csv())?;
    write(
        out,
        "timing.csv",
        &timing_csv(&[
            ("setup", res.timing.setup_s),
            ("solve", res.timing.solve_s),
            ("total", wall_s),
        ]),
    )
}

fn print_envelope(res: &EnvelopeResult, wall_s: f64) {
    println!("mode: {}", res.mode);
    println!("status: {}", res.status);
    if let Some(obj) = res.objective_kw {
        println!("objective_kw: {obj:.4}");
    }
    for c in &res.active {
        println!("  {} p={:.4} kW q={:.4} kvar", c.id, c.p_kw, c.q_kvar);
    }
    println!(
        "time: setup {:.4} s, solve {:.4} s, total {:.4} s (including model setup)",
        res.timing.setup_s, res.timing.solve_s, wall_s
    );
}

pub fn cmd_ddoe(a: &EnvelopeArgs) -> CliResult<()> {
    let start = Instant::now();
    let net = load_network(&a.network)?;
    let opts = envelope_options(a)?;
    let fr = region(&net)?;
    let res = solve_ddoe(&fr, &opts)?;
    let wall = start.elapsed().as_secs_f64();
    ensure_optimal(&res)?;
    print_envelope(&res, wall);
    write_envelope(&a.out, &res, wall)
}

#[derive(Serialize)]
struct Robustness {
    mode: String,
    samples: usize,
    seed: u64,
    worst_violation_pu: f64,
}

pub fn cmd_rdoe(a: &RobustArgs) -> CliResult<()> {
    let start = Instant::now();
    let net = load_network(&a.env.network)?;
    let opts = envelope_options(&a.env)?;
    let mode = parse_mode(&a.mode)?;
    let model = uncertainty_model(&net, &a.unc)?;
    let fr = region(&net)?;
    let res = solve_rdoe(&fr, &model, mode, &opts)?;
    let wall = start.elapsed().as_secs_f64();
    ensure_optimal(&res)?;
    print_envelope(&res, wall);
    write_envelope(&a.env.out, &res, wall)?;
    if a.samples > 0 && mode != RobustMode::Deterministic {
        let worst = sampled_worst_violation(&fr, &model, mode, &res, a.samples, a.env.seed)?;
        println!("worst sampled linear-model violation: {worst:.3e} p.u. over {} draws", a.samples);
        write(
            &a.env.out,
            "robustness.json",
            &to_json(&Robustness {
                mode: mode.to_string(),
                samples: a.samples,
                seed: a.env.seed,
                worst_violation_pu: worst,
            }),
        )?;
    }
    Ok(())
}

fn polygon_rows(s: &mut String, region: &str, poly: &Polygon) {
    for b in &poly.points {
        s.push_str(&format!("{region},{:.4},{:.6},{:.6}\n", b.angle_deg, b.p_a_kw, b.p_b_kw));
    }
}

pub fn cmd_fr_trace(a: &TraceArgs) -> CliResult<()> {
    let r = &a.robust;
    let net = load_network(&r.env.network)?;
    let opts = envelope_options(&r.env)?;
    let mode = parse_mode(&r.mode)?;
    let fr = region(&net)?;
    let n_active = fr.system.n_active();
    if n_active != 2 {
        return Err(CliError::Config(format!(
            "fr-trace needs exactly two active customers, the network has {n_active}"
        )));
    }
    let mut csv = String::from("region,angle_deg,p_a_kw,p_b_kw\n");
    let det = trace_fr_2d(&fr, &opts, a.directions)?;
    if let Some(d) = &det.diagnostic {
        return Err(CliError::Infeasible(format!("deterministic region: {d}")));
    }
    polygon_rows(&mut csv, "deterministic", &det);
    let doe_opts = EnvelopeOptions {
        allocation: AllocationPolicy::StrictlyEqual,
        ..opts.clone()
    };
    let mut doe = vec![("doe-deterministic", solve_ddoe(&fr, &doe_opts)?)];
    if mode != RobustMode::Deterministic {
        let model = uncertainty_model(&net, &r.unc)?;
        let rob = trace_region(&fr, &opts, a.directions, |p, l| robustrc::constrain(p, l, &fr, &model, mode))?;
        if let Some(d) = &rob.diagnostic {
            return Err(CliError::Infeasible(format!("robust region: {d}")));
        }
        polygon_rows(&mut csv, "robust", &rob);
        doe.push(("doe-robust", solve_rdoe(&fr, &model, mode, &doe_opts)?));
        println!("robust polygon: {} points", rob.points.len());
    }
    for (name, res) in &doe {
        ensure_optimal(res)?;
        let p = res.p1();
        csv.push_str(&format!("{name},,{:.6},{:.6}\n", p[0], p[1]));
        println!("{name}: ({:.4}, {:.4}) kW", p[0], p[1]);
    }
    println!("deterministic polygon: {} points", det.points.len());
    write(&r.env.out, "fr_trace.csv", &csv)
}

#[derive(Serialize)]
struct SampledAudit {
    samples: usize,
    seed: u64,
    worst_excess: f64,
    violating: usize,
    not_converged: usize,
}

#[derive(Serialize)]
struct AuditOutput {
    mode: String,
    objective_kw: Option<f64>,
    nominal: AuditReport,
    sampled: Option<SampledAudit>,
}

pub fn cmd_pf_audit(a: &AuditArgs) -> CliResult<()> {
    let r = &a.robust;
    let net = load_network(&r.env.network)?;
    let opts = envelope_options(&r.env)?;
    let mode = parse_mode(&r.mode)?;
    let fr = region(&net)?;
    let model = if mode == RobustMode::Deterministic {
        None
    } else {
        Some(uncertainty_model(&net, &r.unc)?)
    };
    let res = match &model {
        Some(m) => solve_rdoe(&fr, m, mode, &opts)?,
        None => solve_ddoe(&fr, &opts)?,
    };
    ensure_optimal(&res)?;
    let nominal = feasibility_audit(&net, &res, None)?;
    if !nominal.converged {
        return Err(CliError::Solver("power flow did not converge at the envelope".into()));
    }
    println!(
        "nominal: vm in [{:.5}, {:.5}], worst excess {:.3e} p.u., {} violations",
        nominal.vm_min,
        nominal.vm_max,
        nominal.worst_excess,
        nominal.violations.len()
    );
    let sampled = match (&model, r.samples) {
        (Some(m), n) if n > 0 => Some(sampled_audit(&net, m, mode, &res, n, r.env.seed)?),
        _ => None,
    };
    if let Some(s) = &sampled {
        println!(
            "sampled: {} draws, worst excess {:.3e} p.u., {} violating, {} not converged",
            s.samples, s.worst_excess, s.violating, s.not_converged
        );
    }
    write(
        &r.env.out,
        "audit.json",
        &to_json(&AuditOutput {
            mode: mode.to_string(),
            objective_kw: res.objective_kw,
            nominal,
            sampled,
        }),
    )
}

fn sampled_audit(
    net: &NetworkModel,
    model: &UncertaintyModel,
    mode: RobustMode,
    res: &EnvelopeResult,
    samples: usize,
    seed: u64,
) -> CliResult<SampledAudit> {
    let use_e = matches!(mode, RobustMode::Impedance | RobustMode::Bilinear);
    let use_d = matches!(mode, RobustMode::Demand | RobustMode::Bilinear);
    let (fp2, mut fq2) = passive_forecast(net);
    for (j, c) in res.passive_q.iter().enumerate() {
        fq2[j] = c.q_kvar;
    }
    // Draw sequentially so the realizations do not depend on thread count.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(samples);
    for _ in 0..samples {
        let theta = match (&model.impedance, use_e) {
            (Some(imp), true) => Some(imp.set.sample(&mut rng)?),
            _ => None,
        };
        let p2 = match (&model.p2, use_d) {
            (Some(set), true) => set.sample(&mut rng)?,
            _ => fp2.clone(),
        };
        let q2 = match (&model.q2, use_d) {
            (Some(set), true) => set.sample(&mut rng)?,
            _ => fq2.clone(),
        };
        draws.push((theta, p2, q2));
    }
    let reports: Vec<AuditReport> = draws
        .par_iter()
        .map(|(theta, p2, q2)| {
            let moved = match (theta, &model.impedance) {
                (Some(t), Some(imp)) => imp.params.apply_to_network(net, t)?,
                _ => net.clone(),
            };
            let powers = customer_powers(&moved, &res.p1(), &res.q1(), p2, q2);
            let pf = solve_acpf(&moved, &powers, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            Ok(audit_voltages(&moved, &pf))
        })
        .collect::<Result<_, rdoe_core::Error>>()?;
    Ok(SampledAudit {
        samples,
        seed,
        worst_excess: reports.iter().map(|r| r.worst_excess).fold(0.0, f64::max),
        violating: reports.iter().filter(|r| !r.violations.is_empty()).count(),
        not_converged: reports.iter().filter(|r| !r.converged).count(),
    })
}

pub fn cmd_lin_error(a: &LinErrorArgs) -> CliResult<()> {
    let net = load_network(&a.network)?;
    let flat = OperatingPoint::flat(&net);
    let rows = linearization_error_report(&net, &flat, &standard_scenarios())?;
    let csv = error_report_csv(&rows);
    print!("{csv}");
    write(&a.out, "lin_error.csv", &csv)?;
    if a.refine {
        let mut refined = Vec::new();
        for sc in standard_scenarios() {
            let op = refined_point(&net, &flat, &sc)?;
            refined.extend(linearization_error_report(&net, &op, &[sc])?);
        }
        write(&a.out, "lin_error_refined.csv", &error_report_csv(&refined))?;
    }
    Ok(())
}

pub fn cmd_tsro(a: &TsroArgs) -> CliResult<()> {
    let start = Instant::now();
    let net = load_network(&a.env.network)?;
    let opts = envelope_options(&a.env)?;
    let model = uncertainty_model(&net, &a.unc)?;
    if !(a.violation_tol >= 0.0) || a.max_rounds == 0 {
        return Err(CliError::Config("--violation-tol must be >= 0 and --max-rounds >= 1".into()));
    }
    let fr = region(&net)?;
    let (res, trace) = tsro_solve(
        &fr,
        &model,
        &opts,
        &TsroOptions {
            tol: a.violation_tol,
            max_rounds: a.max_rounds,
        },
    )?;
    let wall = start.elapsed().as_secs_f64();
    write(&a.env.out, "tsro_trace.csv", &trace.to_csv())?;
    ensure_optimal(&res)?;
    print_envelope(&res, wall);
    println!("rounds: {}, termination: {:?}", trace.rounds.len(), trace.termination);
    if trace.termination == Termination::MaxRounds {
        eprintln!("warning: no convergence within {} rounds; result is the last master solution", a.max_rounds);
    }
    write_envelope(&a.env.out, &res, wall)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    if a.repeats == 0 {
        return Err(CliError::Config("--repeats must be at least 1".into()));
    }
    let net = load_network(&a.env.network)?;
    let base = envelope_options(&a.env)?;
    let model = uncertainty_model(&net, &a.unc)?;
    let mut csv = String::from("case,q_control,objective_kw,setup_s,solve_s,total_s,repeats\n");
    let mut timing = String::from("case,q_control,repeat,setup_s,solve_s,total_s\n");
    println!("case,q_control,objective_kw,median_total_s");
    for q in [QControl::Fixed, QControl::Active] {
        let opts = EnvelopeOptions {
            q_control: q,
            ..base.clone()
        };
        for case in ["det", "impedance", "demand", "bilinear", "tsro"] {
            let mut setup = Vec::new();
            let mut solve = Vec::new();
            let mut total = Vec::new();
            let mut objective = None;
            for rep in 0..a.repeats {
                let start = Instant::now();
                let fr = region(&net)?;
                let res = match case {
                    "tsro" => tsro_solve(&fr, &model, &opts, &TsroOptions::default())?.0,
                    _ => solve_rdoe(&fr, &model, parse_mode(case)?, &opts)?,
                };
                let t = start.elapsed().as_secs_f64();
                ensure_optimal(&res)?;
                objective = res.objective_kw;
                timing.push_str(&format!(
                    "{case},{q:?},{rep},{:.6},{:.6},{t:.6}\n",
                    res.timing.setup_s, res.timing.solve_s
                ));
                setup.push(res.timing.setup_s);
                solve.push(res.timing.solve_s);
                total.push(t);
            }
            let obj = objective.unwrap_or(f64::NAN);
            let med = median(total);
            csv.push_str(&format!(
                "{case},{q:?},{obj:.4},{:.6},{:.6},{med:.6},{}\n",
                median(setup),
                median(solve),
                a.repeats
            ));
            println!("{case},{q:?},{obj:.4},{med:.6}");
        }
    }
    write(&a.env.out, "bench.csv", &csv)?;
    write(&a.env.out, "timing.csv", &timing)
}
