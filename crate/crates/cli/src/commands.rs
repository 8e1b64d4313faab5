use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use reconfig_core::bermodel::{BerCurve, CurveRecord, DensityRange, SchemeId};
use reconfig_core::curvefit::{rank_degrees, read_samples_csv};
use reconfig_core::evaluate::{
    emit_trace, equal_share_baseline, prior_work_baseline, write_trace_csv, Comparison, Delta, Entry,
};
use reconfig_core::kkt::{kkt_verify, KktCertificate, Objective};
use reconfig_core::offline::{
    solve_problem1, solve_problem2, solve_problem3, Plan, SchemeCatalog, ShareBounds,
};
use reconfig_core::online::{
    plan_from_fits, run_online, violation_fraction, BerOracle, CurveOracle, LogOracle, OnlineSetup,
};

use crate::input::{self, emit, sig15};
use crate::{CompareArgs, FitArgs, OnlineArgs, SolveArgs, TraceArgs};

fn to_toml<T: Serialize>(doc: &T) -> Result<String> {
    toml::to_string(doc).context("serializing output document")
}

/// Appends `table` as comment lines so the document stays valid TOML.
fn with_comment(doc: String, table: &str) -> String {
    let mut out = doc;
    out.push('\n');
    for line in table.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct ReportRecord {
    scheme: SchemeId,
    rank: usize,
    degree: usize,
    coefficients: Vec<f64>,
    mse: f64,
    condition_flag: bool,
}

#[derive(Serialize)]
struct FitDoc<'a> {
    config: &'a FitArgs,
    report: Vec<ReportRecord>,
}

#[derive(Serialize)]
struct CurveDoc<'a> {
    config: &'a FitArgs,
    curve: Vec<CurveRecord>,
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let body = if let Some(name) = &args.fixture {
        let curves = input::builtin(name)?;
        to_toml(&CurveDoc {
            config: args,
            curve: curves.iter().map(CurveRecord::from).collect(),
        })?
    } else {
        let scheme: SchemeId = args.scheme.as_deref().expect("clap requires --scheme").parse()?;
        let path = args.data.as_ref().expect("clap requires --data");
        if args.degrees.is_empty() {
            bail!("--degrees needs at least one value");
        }
        let samples = read_samples_csv(path)?;
        let reports = rank_degrees(&samples, &args.degrees)?;
        let report = reports
            .into_iter()
            .enumerate()
            .map(|(i, r)| ReportRecord {
                scheme,
                rank: i + 1,
                degree: r.degree,
                coefficients: r.coefficients.iter().map(|&c| sig15(c)).collect(),
                mse: r.mse,
                condition_flag: r.condition_flag,
            })
            .collect();
        to_toml(&FitDoc { config: args, report })?
    };
    emit(args.out.as_deref(), "fit.toml", &body)
}

#[derive(Serialize)]
struct ProblemRecord {
    number: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
    region: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective_weights: Option<[f64; 4]>,
    /// (avg adder, capacity) corners of the best-capacity curve.
    #[serde(skip_serializing_if = "Option::is_none")]
    breakpoints: Option<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct SolveDoc<'a> {
    config: &'a SolveArgs,
    plan: &'a Plan,
    bounds: &'a ShareBounds,
    problem: ProblemRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    kkt: Option<KktCertificate>,
}

#[derive(Serialize)]
struct DeltaRecord {
    name: String,
    #[serde(flatten)]
    delta: Delta,
}

#[derive(Serialize)]
struct CompareDoc<'a, C: Serialize> {
    config: &'a C,
    comparison: &'a Comparison,
    deltas: Vec<DeltaRecord>,
}

fn compare_doc<C: Serialize>(config: &C, comparison: &Comparison) -> Result<String> {
    let deltas = comparison
        .deltas()
        .into_iter()
        .map(|(name, delta)| DeltaRecord { name, delta })
        .collect();
    let doc = to_toml(&CompareDoc { config, comparison, deltas })?;
    Ok(with_comment(doc, &comparison.render_table()))
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    let curves = input::required_curves(&args.curves)?;
    let range = input::range(&args.range)?;
    let a = args.range.threshold;
    let cat = SchemeCatalog::length23();

    let (solution, problem, objective) = match args.problem {
        1 => {
            let s = solve_problem1(&cat, &curves, a, &range)?;
            let rec = ProblemRecord {
                number: 1,
                c: None,
                z: None,
                region: "capacity".into(),
                objective_weights: Some(cat.rates),
                breakpoints: None,
            };
            (s, rec, Some(Objective::Capacity))
        }
        2 => {
            let c = args.c.ok_or_else(|| anyhow!("problem 2 needs --c"))?;
            let s = solve_problem2(&cat, &curves, a, &range, c)?;
            let rec = ProblemRecord {
                number: 2,
                c: Some(c),
                z: None,
                region: s.region.label().into(),
                objective_weights: Some(s.k),
                breakpoints: None,
            };
            (s.solution, rec, Some(Objective::Tradeoff { c }))
        }
        _ => {
            let z = args.z.ok_or_else(|| anyhow!("problem 3 needs --z"))?;
            let s = solve_problem3(&cat, &curves, a, &range, z)?;
            let rec = ProblemRecord {
                number: 3,
                c: None,
                z: Some(z),
                region: s.region.to_string(),
                objective_weights: None,
                breakpoints: Some(s.breakpoints.points.iter().map(|&(z, cap)| [z, cap]).collect()),
            };
            (s.solution, rec, None)
        }
    };
    let kkt = objective
        .map(|o| kkt_verify(&solution.plan, &cat, &curves, a, &range, o))
        .transpose()
        .context("building KKT certificate")?;

    let doc = to_toml(&SolveDoc {
        config: args,
        plan: &solution.plan,
        bounds: &solution.bounds,
        problem,
        kkt,
    })?;

    let name = format!("problem-{}", args.problem);
    let comparison = baseline_comparison(&name, &solution.plan, &curves, a, &range, "prior-work")?;
    match args.out.as_deref() {
        Some(dir) => {
            emit(Some(dir), "plan.toml", &doc)?;
            emit(Some(dir), "comparison.toml", &compare_doc(args, &comparison)?)?;
            print!("{}", comparison.render_table());
        }
        None => print!("{}", with_comment(doc, &comparison.render_table())),
    }
    Ok(())
}

fn baseline_comparison(
    name: &str,
    plan: &Plan,
    truth: &[BerCurve],
    a: f64,
    range: &DensityRange,
    reference: &str,
) -> Result<Comparison> {
    let cat = SchemeCatalog::length23();
    let entries = vec![
        Entry::from_plan(name, plan, truth, a, range)?,
        Entry::from_plan("equal-share", &equal_share_baseline(&cat, range, a), truth, a, range)?,
        prior_work_baseline(),
    ];
    Ok(Comparison::new(reference, entries)?)
}

#[derive(Serialize)]
struct FitRecord {
    scheme: SchemeId,
    start: f64,
    end: f64,
    sample_count: usize,
    degree: usize,
    coefficients: Vec<f64>,
    mse: f64,
    condition_flag: bool,
}

#[derive(Serialize)]
struct OnlineDoc<'a> {
    config: &'a OnlineArgs,
    #[serde(skip_serializing_if = "Option::is_none")]
    setup: Option<OnlineSetup>,
    plan: Plan,
    #[serde(skip_serializing_if = "Option::is_none")]
    violation_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw_switches: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    never_crossed: Option<[bool; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clamped: Option<[bool; 3]>,
    diagnostics: Vec<String>,
    fit: Vec<FitRecord>,
}

pub fn online(args: &OnlineArgs) -> Result<()> {
    let range = input::range(&args.range)?;
    let a = args.range.threshold;
    let cat = SchemeCatalog::length23();
    let truth = input::curves(&args.curves)?;

    let mut doc = OnlineDoc {
        config: args,
        setup: None,
        plan: equal_share_baseline(&cat, &range, a),
        violation_fraction: None,
        raw_switches: None,
        never_crossed: None,
        clamped: None,
        diagnostics: Vec::new(),
        fit: Vec::new(),
    };

    if let Some(spec) = &args.fits {
        let fits = input::named_or_file(spec)?;
        doc.plan = plan_from_fits(&fits, &cat, a, &range)?;
        doc.fit = fits
            .iter()
            .map(|c| FitRecord {
                scheme: c.scheme,
                start: c.domain.0,
                end: c.domain.1,
                sample_count: 0,
                degree: c.degree(),
                coefficients: c.coefficients.clone(),
                mse: 0.0,
                condition_flag: false,
            })
            .collect();
    } else {
        let setup = match (&args.setup_config, args.setup) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                OnlineSetup::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            (None, Some(id)) => OnlineSetup::standard(id, args.seed)?,
            (None, None) => bail!("give --setup, --setup-config or --fits"),
        };
        let oracle: Box<dyn BerOracle> = match (&args.log, &truth) {
            (Some(path), _) => Box::new(LogOracle::from_path(path)?),
            (None, Some(curves)) => Box::new(CurveOracle::new(curves.clone()).with_noise(args.noise, args.seed)?),
            (None, None) => bail!("online needs an oracle: --log or truth curves (--fixture, --curves, --data)"),
        };
        let switches = match (&args.switches, &truth) {
            (Some(s), _) => <[f64; 3]>::try_from(s.as_slice())
                .map_err(|_| anyhow!("--switches needs exactly three densities"))?,
            (None, Some(curves)) => solve_problem1(&cat, curves, a, &range)
                .context("solving the offline plan that places the training regions")?
                .plan
                .switch_densities,
            (None, None) if setup.setup_id == 4 => [range.d0; 3],
            (None, None) => bail!("setups 1-3 need --switches or truth curves"),
        };
        let r = run_online(&setup, &switches, oracle.as_ref(), &cat, a, &range)?;
        doc.plan = r.plan;
        doc.raw_switches = Some(r.raw_switches);
        doc.never_crossed = Some(r.never_crossed);
        doc.clamped = Some(r.clamped);
        doc.diagnostics = r.diagnostics;
        doc.fit = r
            .fits
            .iter()
            .map(|f| FitRecord {
                scheme: f.region.scheme,
                start: f.region.start,
                end: f.region.end,
                sample_count: f.region.sample_count,
                degree: f.report.degree,
                coefficients: f.report.coefficients.iter().map(|&c| sig15(c)).collect(),
                mse: f.report.mse,
                condition_flag: f.report.condition_flag,
            })
            .collect();
        doc.setup = Some(setup);
    }
    if let Some(curves) = &truth {
        doc.violation_fraction = Some(violation_fraction(&doc.plan, curves, a, &range)?);
    }
    emit(args.out.as_deref(), "online.toml", &to_toml(&doc)?)
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let curves = input::required_curves(&args.curves)?;
    let range = input::range(&args.range)?;
    let a = args.range.threshold;
    let cat = SchemeCatalog::length23();

    let mut entries = Vec::new();
    let p1 = solve_problem1(&cat, &curves, a, &range)?;
    entries.push(Entry::from_plan("problem-1", &p1.plan, &curves, a, &range)?);
    for &c in &args.c {
        let s = solve_problem2(&cat, &curves, a, &range, c)?;
        entries.push(Entry::from_plan(&format!("problem-2 c={c}"), &s.solution.plan, &curves, a, &range)?);
    }
    for &z in &args.z {
        let s = solve_problem3(&cat, &curves, a, &range, z)?;
        entries.push(Entry::from_plan(&format!("problem-3 z={z}"), &s.solution.plan, &curves, a, &range)?);
    }
    for path in &args.plan {
        let plan = input::read_plan(path)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("plan");
        entries.push(Entry::from_plan(name, &plan, &curves, a, &range)?);
    }
    entries.push(Entry::from_plan("equal-share", &equal_share_baseline(&cat, &range, a), &curves, a, &range)?);
    entries.push(prior_work_baseline());
    let comparison = Comparison::new(&args.reference, entries)?;

    match args.out.as_deref() {
        Some(dir) => {
            emit(Some(dir), "comparison.toml", &compare_doc(args, &comparison)?)?;
            print!("{}", comparison.render_table());
        }
        None => print!("{}", compare_doc(args, &comparison)?),
    }
    Ok(())
}

pub fn trace(args: &TraceArgs) -> Result<()> {
    let curves = input::required_curves(&args.curves)?;
    let range = input::range(&args.range)?;
    let a = args.range.threshold;
    let cat = SchemeCatalog::length23();
    let plan = match (&args.plan, &args.shares) {
        (Some(path), _) => input::read_plan(path)?,
        (None, Some(shares)) => {
            let x = <[f64; 4]>::try_from(shares.as_slice()).map_err(|_| anyhow!("--shares needs four values"))?;
            Plan::from_shares(x, &cat, a, range)?
        }
        (None, None) => solve_problem1(&cat, &curves, a, &range)?.plan,
    };
    let rows = emit_trace(&plan, &curves, &range, args.step)?;
    let mut csv = Vec::new();
    write_trace_csv(&rows, &mut csv)?;
    let csv = String::from_utf8(csv).expect("csv output is utf-8");
    match args.out.as_deref() {
        Some(dir) => {
            // the CSV layout is fixed, so the configuration goes alongside it
            #[derive(Serialize)]
            struct TraceDoc<'a> {
                config: &'a TraceArgs,
                plan: &'a Plan,
                rows: usize,
            }
            emit(Some(dir), "trace.csv", &csv)?;
            emit(Some(dir), "trace.toml", &to_toml(&TraceDoc { config: args, plan: &plan, rows: rows.len() })?)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}
