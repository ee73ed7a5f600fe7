//! Subcommand implementations. Each returns a JSON payload; printing and exit
//! codes are handled in `output`.

use std::fs;
use std::io::Read;
use std::path::Path;

use jmsteer::bridge::{assemblage_of, measurements_of, noise_duality_check, pvm_threshold};
use jmsteer::conic::{ConicCertificate, SolverTolerances};
use jmsteer::error::Error;
use jmsteer::ft::{ft_from_assemblage, ft_steering_value, FtInstance, FtVerdict};
use jmsteer::hermitian::HermitianOperator;
use jmsteer::incompatibility::{jm_feasible, jm_robustness, jm_robustness_bisection, parent_povm, RobustnessResult};
use jmsteer::json::{digest, matrix_from_value};
use jmsteer::lhv::{
    classes_tag, lambda_max, lhv_decompose, scan_lambda_max, state_family, ua_samples, DecompositionOutcome,
    DecompositionResult, EulerAngles, LhvClass,
};
use jmsteer::measurements::{standard_set, MeasurementSet, SetParams};
use jmsteer::steering::{lhs_feasible, steering_robustness, steering_robustness_bisection, Assemblage};
use serde_json::{json, Value};

use crate::output::{CliError, Outcome};
use crate::{AsmInput, BridgeCommand, ClassArgs, Cli, Command, FtCommand, JmCommand, LhvCommand, SetInput, SteerCommand, StdlibArgs};

type CmdResult = Result<Outcome, CliError>;

pub fn run(cli: &Cli) -> CmdResult {
    let tol = SolverTolerances {
        feasibility: cli.tol,
        gap: cli.tol,
        max_iter: cli.max_iter,
        ..SolverTolerances::default()
    };
    if !(cli.tol > 0.0 && cli.tol < 1.0) {
        return Err(CliError::input(format!("--tol must lie in (0, 1), got {}", cli.tol)));
    }
    match &cli.command {
        Command::Jm(c) => jm(c, &tol),
        Command::Steer(c) => steer(c, &tol),
        Command::Bridge(c) => bridge(c),
        Command::Ft(c) => ft(c),
        Command::Lhv(c) => lhv(c, cli, &tol),
        Command::Stdlib(a) => stdlib(a),
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
    };
    Ok(serde_json::from_str(&text)?)
}

fn parse_vec3(text: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::input(format!("`{text}`: {e}")))?;
    parts
        .try_into()
        .map_err(|_| CliError::input(format!("`{text}`: expected three comma-separated numbers")))
}

fn named_set(name: &str, eta: f64, directions: Option<&str>) -> Result<MeasurementSet, CliError> {
    let directions = match directions {
        Some(d) => d.split(';').map(parse_vec3).collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    Ok(standard_set(name, &SetParams { eta, directions })?)
}

fn load_set(input: &SetInput) -> Result<MeasurementSet, CliError> {
    match (&input.input, &input.stdlib) {
        (Some(path), _) => Ok(MeasurementSet::from_json(&read_json(path)?)?),
        (None, Some(name)) => named_set(name, input.eta, input.directions.as_deref()),
        (None, None) => Err(CliError::input("give --input FILE or --stdlib NAME")),
    }
}

fn load_asm(input: &AsmInput) -> Result<Assemblage, CliError> {
    match (&input.input, &input.stdlib) {
        (Some(path), _) => Ok(Assemblage::from_json(&read_json(path)?)?),
        (None, Some(name)) => Ok(assemblage_of(&named_set(name, input.eta, input.directions.as_deref())?)),
        (None, None) => Err(CliError::input("give --input FILE or --stdlib NAME")),
    }
}

fn checked(cert: &ConicCertificate) -> Value {
    json!({
        "certificate_digest": cert.digest(),
        "certificate": cert,
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

fn robustness_payload(r: &RobustnessResult) -> Value {
    json!({
        "lambda": r.lambda,
        "method": r.method,
        "primal_digest": r.primal.digest(),
        "witness_digest": r.witness.as_ref().map(ConicCertificate::digest),
        "diagnostics": r.diagnostics,
    })
}

fn jm(cmd: &JmCommand, tol: &SolverTolerances) -> CmdResult {
    match cmd {
        JmCommand::Check(input) => {
            let set = load_set(input)?;
            let (ok, cert) = jm_feasible(&set, tol)?;
            let verdict = if ok { "jointly_measurable" } else { "not_jointly_measurable" };
            Ok(Outcome::verdict(merge(json!({"verdict": verdict}), checked(&cert)), ok))
        }
        JmCommand::Robustness { set, bisection } => {
            let set = load_set(set)?;
            let r = match bisection {
                Some(res) => jm_robustness_bisection(&set, *res, tol)?,
                None => jm_robustness(&set, tol)?,
            };
            Ok(Outcome::ok(robustness_payload(&r)))
        }
        JmCommand::Parent { set, lambda } => {
            let set = load_set(set)?;
            match parent_povm(&set, *lambda, tol) {
                Ok(p) => {
                    let parent = MeasurementSet::new(vec![p.povm.clone()])?;
                    let payload = json!({
                        "verdict": "jointly_measurable",
                        "lambda": lambda,
                        "parent": parent.to_json(),
                        "tuples": p.post.tuples,
                        "residual": p.residual,
                        "parent_digest": digest(&p),
                    });
                    Ok(Outcome::ok(payload))
                }
                Err(Error::NotJointlyMeasurable { lambda }) => Ok(Outcome::verdict(
                    json!({"verdict": "not_jointly_measurable", "lambda": lambda}),
                    false,
                )),
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn steer(cmd: &SteerCommand, tol: &SolverTolerances) -> CmdResult {
    match cmd {
        SteerCommand::Check(input) => {
            let asm = load_asm(input)?;
            let (lhs, cert) = lhs_feasible(&asm, tol)?;
            let verdict = if lhs { "unsteerable" } else { "steerable" };
            Ok(Outcome::verdict(merge(json!({"verdict": verdict}), checked(&cert)), !lhs))
        }
        SteerCommand::Robustness { asm, bisection } => {
            let asm = load_asm(asm)?;
            let r = match bisection {
                Some(res) => steering_robustness_bisection(&asm, *res, tol)?,
                None => steering_robustness(&asm, tol)?,
            };
            Ok(Outcome::ok(robustness_payload(&r)))
        }
    }
}

/// Entry difference at which the two noise models count as the same assemblage.
const DUALITY_TOL: f64 = 1e-10;

fn bridge(cmd: &BridgeCommand) -> CmdResult {
    match cmd {
        BridgeCommand::ToAssemblage(input) => Ok(Outcome::ok(assemblage_of(&load_set(input)?).to_json())),
        BridgeCommand::ToMeasurements { input } => {
            let asm = Assemblage::from_json(&read_json(input)?)?;
            Ok(Outcome::ok(measurements_of(&asm)?.to_json()))
        }
        BridgeCommand::DualityCheck { set, state, lambda } => {
            let set = load_set(set)?;
            let state = match state {
                Some(path) => matrix_from_value(&read_json(path)?, "$")?,
                None => HermitianOperator::max_entangled(set.dim()),
            };
            let gap = noise_duality_check(&state, &set, *lambda)?;
            let consistent = gap <= DUALITY_TOL;
            Ok(Outcome::verdict(
                json!({"lambda": lambda, "max_discrepancy": gap, "consistent": consistent}),
                consistent,
            ))
        }
        BridgeCommand::Threshold { d } => Ok(Outcome::ok(serde_json::to_value(pvm_threshold(*d)?)?)),
    }
}

fn ft(cmd: &FtCommand) -> CmdResult {
    let FtCommand::Eval { x1, x2, x3, input } = cmd;
    let inst = match (x1, x2, x3, input) {
        (Some(a), Some(b), Some(c), None) => FtInstance::new(parse_vec3(a)?, parse_vec3(b)?, parse_vec3(c)?)?,
        (None, None, None, Some(path)) => ft_from_assemblage(&Assemblage::from_json(&read_json(path)?)?)?,
        _ => return Err(CliError::input("give --x1 --x2 --x3 or --input FILE")),
    };
    let eval = ft_steering_value(&inst)?;
    let payload = json!({
        "verdict": eval.verdict,
        "value": eval.value,
        "point": eval.point,
        "x": inst.x,
        "evaluation_digest": digest(&eval),
    });
    Ok(Outcome::verdict(payload, eval.verdict == FtVerdict::Steerable))
}

fn classes(args: &ClassArgs) -> Result<Vec<LhvClass>, CliError> {
    Ok(LhvClass::parse_list(&args.classes, args.n_bob)?)
}

fn decomposition_payload(d: &DecompositionResult) -> Value {
    json!({
        "components": d.components,
        "residual": d.residual,
        "certificate_digest": d.certificate.digest(),
    })
}

fn parse_grid(text: &str) -> Result<[usize; 3], CliError> {
    let parts: Vec<usize> = text
        .split(['x', ','])
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::input(format!("--ua-grid `{text}`: {e}")))?;
    parts
        .try_into()
        .map_err(|_| CliError::input(format!("--ua-grid `{text}`: expected AxBxC")))
}

fn parse_s_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |e: String| CliError::input(format!("--s-grid `{text}`: {e}"));
    let fields: Vec<&str> = text.split(':').collect();
    match fields.as_slice() {
        [start, stop, count] => {
            let start: f64 = start.trim().parse().map_err(|e| bad(format!("{e}")))?;
            let stop: f64 = stop.trim().parse().map_err(|e| bad(format!("{e}")))?;
            let n: usize = count.trim().parse().map_err(|e| bad(format!("{e}")))?;
            match n {
                0 => Err(bad("count must be positive".into())),
                1 => Ok(vec![start]),
                _ => Ok((0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect()),
            }
        }
        [list] => list
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| bad(format!("{e}"))))
            .collect(),
        _ => Err(bad("expected start:stop:count or a list".into())),
    }
}

fn lhv(cmd: &LhvCommand, cli: &Cli, tol: &SolverTolerances) -> CmdResult {
    match cmd {
        LhvCommand::Decompose { s, lambda, ua, classes: cargs } => {
            let [a, b, g] = parse_vec3(ua)?;
            let ua = EulerAngles::new(a, b, g);
            let cls = classes(cargs)?;
            let base = json!({"s": s, "ua": ua, "classes": classes_tag(&cls), "ppt": cargs.ppt});
            match lambda {
                Some(l) => match lhv_decompose(&state_family(*s, ua, *l)?, &cls, cargs.ppt, tol)? {
                    DecompositionOutcome::Found(d) => Ok(Outcome::ok(merge(
                        base,
                        merge(json!({"status": "found", "lambda": l}), decomposition_payload(&d)),
                    ))),
                    DecompositionOutcome::Infeasible { certificate } => Ok(Outcome::verdict(
                        merge(base, json!({"status": "infeasible", "lambda": l, "certificate_digest": certificate.digest()})),
                        false,
                    )),
                },
                None => match lambda_max(*s, ua, &cls, cargs.ppt, tol) {
                    Ok((l, d)) => Ok(Outcome::ok(merge(
                        base,
                        merge(json!({"status": "found", "lambda_max": l}), decomposition_payload(&d)),
                    ))),
                    Err(Error::NoDecomposition { .. }) => Ok(Outcome::verdict(merge(base, json!({"status": "infeasible"})), false)),
                    Err(e) => Err(e.into()),
                },
            }
        }
        LhvCommand::Scan {
            s_grid,
            ua_grid,
            ua_random,
            classes: cargs,
            csv,
        } => {
            let grid = parse_grid(ua_grid)?;
            let s_values = parse_s_grid(s_grid)?;
            let cls = classes(cargs)?;
            let samples = ua_samples(grid, *ua_random, cli.seed);
            let sampling = format!(
                "euler {}x{}x{} + {} haar (seed {})",
                grid[0], grid[1], grid[2], ua_random, cli.seed
            );
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs)
                .build()
                .map_err(|e| CliError::input(format!("--jobs: {e}")))?;
            eprintln!(
                "scanning {} s values x {} U_A samples on {} threads",
                s_values.len(),
                samples.len(),
                pool.current_num_threads()
            );
            let table = pool.install(|| scan_lambda_max(&s_values, &samples, &cls, cargs.ppt, &sampling, tol))?;
            if let Some(path) = csv {
                let file = fs::File::create(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
                table.write_csv(file)?;
            }
            Ok(Outcome::ok(serde_json::to_value(&table)?))
        }
    }
}

fn stdlib(args: &StdlibArgs) -> CmdResult {
    Ok(Outcome::ok(named_set(&args.name, args.eta, args.directions.as_deref())?.to_json()))
}
