//! Command-line driver: simulation runs, manufactured-solution convergence
//! studies, the relative-energy perturbation experiment, constitutive
//! property checks, and the inf-sup test.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use thermoflow::config::{parse_config, Config};
use thermoflow::constitutive::{
    check_conductivity_bounds, check_growth_coercivity, check_monotonicity, check_theta_lipschitz,
};
use thermoflow::error::Error;
use thermoflow::infsup::inf_sup_constant;
use thermoflow::mesh::unit_square_mesh;
use thermoflow::mms::{default_space_study, mms_case, run_convergence, run_wsu_experiment};
use thermoflow::output::{write_diagnostics_csv, write_fields_vtk};
use thermoflow::scenario::builtin_scenario;
use thermoflow::space::{build_space, Family};
use thermoflow::stepper::run;

const USAGE: &str = "\
usage: thermoflow <subcommand> [args]

subcommands:
  run <config>            run a simulation, write diagnostics CSV (and VTK
                          when output.vtk = true) into output.dir
  mms <case> --levels N   spatial convergence study for a manufactured case
                          (rest_state | stokes_heat | carreau_heat), N >= 3
                          successive refinements of a 10x10 grid
  wsu <config> --eps E    relative-energy perturbation experiment on the
                          configured scenario
  check-model <config>    randomized monotonicity/growth/coercivity and
                          conductivity-bound checks for the configured model
  infsup --levels N       discrete inf-sup constants on N unit-square levels
                          starting at 8x8

exit codes: 0 success, 1 usage or validation error, 2 solver failure
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::from(0),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidInput(_) | Error::Io(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn usage_error(msg: &str) -> Error {
    Error::InvalidInput(format!("{msg}\n{USAGE}"))
}

fn dispatch(args: &[String]) -> Result<(), Error> {
    let Some(sub) = args.first() else {
        return Err(usage_error("missing subcommand"));
    };
    match sub.as_str() {
        "run" => cmd_run(&args[1..]),
        "mms" => cmd_mms(&args[1..]),
        "wsu" => cmd_wsu(&args[1..]),
        "check-model" => cmd_check_model(&args[1..]),
        "infsup" => cmd_infsup(&args[1..]),
        "-h" | "--help" | "help" => {
            print!("{USAGE}");
            Ok(())
        }
        other => Err(usage_error(&format!("unknown subcommand '{other}'"))),
    }
}

fn flag_value(args: &[String], flag: &str) -> Result<Option<usize>, Error> {
    match args.iter().position(|a| a == flag) {
        None => Ok(None),
        Some(i) => {
            let v = args
                .get(i + 1)
                .ok_or_else(|| usage_error(&format!("{flag} needs a value")))?;
            v.parse::<usize>()
                .map(Some)
                .map_err(|e| usage_error(&format!("{flag}: bad value '{v}': {e}")))
        }
    }
}

fn flag_value_f64(args: &[String], flag: &str) -> Result<Option<f64>, Error> {
    match args.iter().position(|a| a == flag) {
        None => Ok(None),
        Some(i) => {
            let v = args
                .get(i + 1)
                .ok_or_else(|| usage_error(&format!("{flag} needs a value")))?;
            v.parse::<f64>()
                .map(Some)
                .map_err(|e| usage_error(&format!("{flag}: bad value '{v}': {e}")))
        }
    }
}

fn load_config(args: &[String]) -> Result<Config, Error> {
    let path = args
        .first()
        .ok_or_else(|| usage_error("missing config path"))?;
    parse_config(Path::new(path))
}

fn cmd_run(args: &[String]) -> Result<(), Error> {
    let cfg = load_config(args)?;
    let scenario = builtin_scenario(&cfg.scenario)?;
    let mut run_cfg = cfg.run.clone();
    if let Some((model, law)) = scenario.bound_model {
        // manufactured scenarios carry their own closures
        run_cfg.model = model;
        run_cfg.conductivity = law;
        println!("scenario '{}' binds its own constitutive model", cfg.scenario);
    }
    let traj = run(&run_cfg, &scenario)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let csv_path = PathBuf::from(&cfg.output_dir).join("diagnostics.csv");
    write_diagnostics_csv(&traj, &csv_path)?;
    println!(
        "ran scenario '{}': {} steps on a {}x{} grid, wrote {}",
        cfg.scenario,
        traj.states.len() - 1,
        1 << run_cfg.mesh_level,
        1 << run_cfg.mesh_level,
        csv_path.display()
    );
    if cfg.write_vtk {
        let vtk_path = PathBuf::from(&cfg.output_dir).join("fields.vtk");
        write_fields_vtk(
            traj.states.last().unwrap(),
            &vtk_path,
            &format!("{} final state", cfg.scenario),
        )?;
        println!("wrote {}", vtk_path.display());
    }
    let last = traj.records.last().unwrap();
    println!(
        "final: kinetic {:.6e}, internal {:.6e}, min_theta {:.6e}, max |energy residual| {:.3e}",
        last.kinetic,
        last.internal,
        last.min_theta,
        traj.records
            .iter()
            .map(|r| r.energy_residual.abs())
            .fold(0.0_f64, f64::max)
    );
    Ok(())
}

fn cmd_mms(args: &[String]) -> Result<(), Error> {
    let name = args
        .first()
        .ok_or_else(|| usage_error("missing case name"))?;
    let n_levels = flag_value(args, "--levels")?.unwrap_or(3);
    let case = mms_case(name)?;
    let (levels, t_final) = default_space_study(n_levels);
    let table = run_convergence(&case, &levels, t_final)?;
    println!("case {name}: errors at t = {t_final}");
    println!("cells       tau      |u-uh|_L2    |D(u-uh)|_L2   |th-thh|_L2   picard");
    for row in &table.rows {
        println!(
            "{:5} {:9.6} {:14.6e} {:14.6e} {:14.6e} {:6}",
            row.cells, row.tau, row.err_u_l2, row.err_u_h1, row.err_theta_l2, row.max_picard_iters
        );
    }
    let fmt_orders = |name: &str, orders: Vec<f64>| {
        let list: Vec<String> = orders.iter().map(|o| format!("{o:.2}")).collect();
        println!("observed {name} orders: {}", list.join(", "));
    };
    if table.rows.iter().all(|r| r.err_u_l2 > 1e-13) {
        fmt_orders("velocity L2", table.orders(|r| r.err_u_l2));
        fmt_orders("velocity H1", table.orders(|r| r.err_u_h1));
        fmt_orders("temperature L2", table.orders(|r| r.err_theta_l2));
    } else {
        println!("errors at machine precision; no orders to report");
    }
    Ok(())
}

fn cmd_wsu(args: &[String]) -> Result<(), Error> {
    let cfg = load_config(args)?;
    let eps = flag_value_f64(args, "--eps")?.unwrap_or(1e-2);
    let outcome = run_wsu_experiment(&cfg.run, &cfg.scenario, eps)?;
    println!("perturbation eps = {eps} on scenario '{}'", cfg.scenario);
    println!("t, relative_energy");
    for (t, e) in &outcome.series {
        println!("{t:.6}, {e:.12e}");
    }
    println!("E0 = {:.12e}", outcome.e0);
    println!("fitted growth constant C = {:.6e}", outcome.c_est);
    if outcome.uniqueness_violation {
        println!("uniqueness violation: E0 vanishes but the series does not");
    }
    Ok(())
}

fn cmd_check_model(args: &[String]) -> Result<(), Error> {
    let cfg = load_config(args)?;
    let model = cfg.run.model;
    let n = cfg.samples;
    let seed = cfg.seed;
    println!("model {model:?}");
    println!("samples {n}, seed {seed}");
    let mono = check_monotonicity(&model, n, seed)?;
    println!(
        "monotonicity: min pairing {:.6e}, strong-monotonicity constant estimate {:.6e}",
        mono.min_pairing, mono.strong_mono_constant_est
    );
    let gc = check_growth_coercivity(&model, n, seed)?;
    println!(
        "growth: c estimate {:.6e}; coercivity: c estimate {:.6e}, offset g {:.6e}",
        gc.growth_c_est, gc.coercivity_c_est, gc.offset_g
    );
    let lip = check_theta_lipschitz(&model, 0.1, 3.0, n, seed)?;
    println!(
        "temperature Lipschitz constant estimate (delta 0.1, |tau| <= 3): {:.6e}",
        lip.c_est
    );
    let (lo, hi) = check_conductivity_bounds(&cfg.run.conductivity, 0.01, 100.0, n, seed);
    println!(
        "conductivity bounds on [0.01, 100]: lower margin {lo:.6e}, sqrt-growth margin {hi:.6e}"
    );
    Ok(())
}

fn cmd_infsup(args: &[String]) -> Result<(), Error> {
    let n_levels = flag_value(args, "--levels")?.unwrap_or(3);
    if n_levels == 0 {
        return Err(usage_error("--levels must be at least 1"));
    }
    println!("level  cells    inf-sup constant");
    for i in 0..n_levels {
        let level = 3 + i as u32;
        let mesh = Arc::new(unit_square_mesh(level)?);
        let v = Arc::new(build_space(Arc::clone(&mesh), Family::P2Vector));
        let p = Arc::new(build_space(mesh, Family::P1Scalar));
        let beta = inf_sup_constant(&v, &p)?;
        println!("{level:5} {:7} {beta:18.12}", 1 << (2 * level + 1));
    }
    Ok(())
}
