use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use dgsim_core::autotune::{tune, Fixture, TuneSpace};
use dgsim_core::kernels::OperatorConfig;
use dgsim_core::maxwell::{CavityMode, Material};
use dgsim_core::mesh::{generate_box_mesh, read_tetgen};
use dgsim_core::solver::{fit_order, run_cavity};
use dgsim_core::{Discretization, DiscretizationOptions, Error, Mesh, Result};
use serde::Serialize;

use crate::args::{Cli, Command, ConvergenceArgs, LayoutArgs, MeshArgs, ModeArgs, SimulateArgs, TuneArgs};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Convergence(a) => convergence(a),
        Command::Simulate(a) => simulate(a),
        Command::Tune(a) => tune_cmd(a),
        Command::LayoutStats(a) => layout_stats(a),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn extent3(v: &[f64]) -> Result<[f64; 3]> {
    v.try_into().map_err(|_| Error::InvalidArgument(format!("expected three extents, got {v:?}")))
}

fn cells3(v: &[usize]) -> Result<[usize; 3]> {
    match v {
        [n] => Ok([*n; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(Error::InvalidArgument(format!("--cells takes one or three values, got {v:?}"))),
    }
}

/// The mesh and the cavity box it fills.
fn load_mesh(m: &MeshArgs) -> Result<(Mesh, [f64; 3])> {
    match (&m.tetgen_node, &m.tetgen_ele) {
        (Some(node), Some(ele)) => {
            let mesh = read_tetgen(&fs::read_to_string(node)?, &fs::read_to_string(ele)?)?;
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for v in &mesh.vertices {
                for i in 0..3 {
                    lo[i] = lo[i].min(v[i]);
                    hi[i] = hi[i].max(v[i]);
                }
            }
            if lo.iter().any(|&l| l.abs() > 1e-12) {
                return Err(Error::InvalidArgument(format!("cavity meshes must start at the origin, lower corner is {lo:?}")));
            }
            Ok((mesh, hi))
        }
        _ => {
            let extent = extent3(&m.extent)?;
            Ok((generate_box_mesh(extent, cells3(&m.cells)?)?, extent))
        }
    }
}

fn cavity(mode: &ModeArgs, extent: [f64; 3]) -> Result<CavityMode> {
    let material = Material::new(mode.epsilon, mode.mu)?;
    CavityMode::new(mode.mode[0], mode.mode[1], mode.mode[2], extent, material)
}

fn validate_mode(mode: &ModeArgs) -> Result<()> {
    if !(mode.cfl > 0.0 && mode.cfl <= 1.0) {
        return Err(Error::InvalidArgument(format!("--cfl must lie in (0, 1], got {}", mode.cfl)));
    }
    if mode.mode.len() != 3 {
        return Err(Error::InvalidArgument(format!("--mode expects m,n,p, got {:?}", mode.mode)));
    }
    if !(mode.final_time >= 0.0) {
        return Err(Error::InvalidArgument(format!("--final-time must be non-negative, got {}", mode.final_time)));
    }
    Ok(())
}

fn validate_orders(orders: &[usize]) -> Result<()> {
    match orders.iter().find(|&&n| !(1..=dgsim_core::refelem::MAX_ORDER).contains(&n)) {
        Some(&n) => Err(Error::InvalidOrder(n)),
        None if orders.is_empty() => Err(Error::InvalidArgument("no orders given".into())),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct ConvergenceRow {
    kind: &'static str,
    order: usize,
    cells: Option<usize>,
    h: Option<f64>,
    elements: Option<usize>,
    steps: Option<usize>,
    dt: Option<f64>,
    l2_error: Option<f64>,
    eoc: Option<f64>,
}

fn convergence(a: &ConvergenceArgs) -> Result<()> {
    validate_orders(&a.orders)?;
    validate_mode(&a.mode)?;
    if a.levels.len() < 2 || a.levels.contains(&0) {
        return Err(Error::InvalidArgument("--levels needs at least two positive cell counts".into()));
    }
    let extent = extent3(&a.extent)?;
    let mode = cavity(&a.mode, extent)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for &order in &a.orders {
        let (mut hs, mut errs) = (Vec::new(), Vec::new());
        for &c in &a.levels {
            let disc = Arc::new(Discretization::new(generate_box_mesh(extent, [c; 3])?, order, DiscretizationOptions::default())?);
            let config = OperatorConfig::published_default(&disc);
            let r = run_cavity(disc, &mode, a.mode.final_time, a.mode.cfl, config, 0)?;
            let h = extent.iter().fold(0.0f64, |m, e| m.max(e / c as f64));
            w.serialize(ConvergenceRow {
                kind: "error",
                order,
                cells: Some(c),
                h: Some(h),
                elements: Some(r.elements),
                steps: Some(r.steps),
                dt: Some(r.dt),
                l2_error: Some(r.l2_error),
                eoc: None,
            })?;
            hs.push(h);
            errs.push(r.l2_error);
        }
        // Exact data (zero error) has no meaningful rate.
        let eoc = fit_order(&hs, &errs).ok();
        w.serialize(ConvergenceRow { kind: "eoc", order, cells: None, h: None, elements: None, steps: None, dt: None, l2_error: None, eoc })?;
    }
    emit(a.output.as_deref(), &String::from_utf8(w.into_inner().map_err(|e| Error::Internal(e.to_string()))?).expect("csv is utf-8"))
}

#[derive(Serialize)]
struct SimulateReport {
    report: dgsim_core::solver::RunReport,
    extent: [f64; 3],
    mode: [u32; 3],
    omega: f64,
    stats: dgsim_core::device::MemStats,
    config: OperatorConfig,
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    validate_orders(&[a.order])?;
    validate_mode(&a.mode)?;
    let (mesh, extent) = load_mesh(&a.mesh)?;
    let mode = cavity(&a.mode, extent)?;
    let disc = Arc::new(Discretization::new(mesh, a.order, DiscretizationOptions::default())?);
    let config = OperatorConfig::published_default(&disc);
    let material = mode.material;
    let dt_max = dgsim_core::maxwell::stable_dt(&disc, &material, a.mode.cfl)?;
    let steps = (a.mode.final_time / dt_max).ceil() as usize;
    // One traced step prices a full RK4 step on the device model.
    let stats = if steps > 0 {
        let law = dgsim_core::MaxwellLaw::new(material);
        let mut s = dgsim_core::solver::Solver::new(disc.clone(), law, config, dgsim_core::device::Device::default())?
            .with_options(dgsim_core::device::LaunchOptions::traced());
        s.set_state(&mode.sample(&disc, 0.0), 0.0)?;
        s.step(a.mode.final_time / steps as f64)?;
        s.stats().clone()
    } else {
        Default::default()
    };
    let report = run_cavity(disc, &mode, a.mode.final_time, a.mode.cfl, config, a.energy_every)?;
    let out = SimulateReport { report, extent, mode: [mode.m, mode.n, mode.p], omega: mode.omega(), stats, config };
    emit(a.output.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))
}

fn tune_cmd(a: &TuneArgs) -> Result<()> {
    validate_orders(&[a.order])?;
    let space = TuneSpace::from_toml(&fs::read_to_string(&a.space)?)?;
    let (mesh, _) = load_mesh(&a.mesh)?;
    let report = tune(&space, &Fixture { mesh, order: a.order, seed: a.seed })?;
    let csv = report.to_csv()?;
    match &a.output {
        Some(prefix) => {
            fs::write(prefix.with_extension("csv"), &csv)?;
            fs::write(prefix.with_extension("json"), report.to_json()? + "\n")?;
        }
        None => emit(None, &csv)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct LayoutRow {
    order: usize,
    block: String,
    elements: usize,
    intra: usize,
    inter: usize,
    boundary: usize,
    descriptors: usize,
    k_m: usize,
    n_pm: usize,
    microblocks: usize,
    waste: f64,
}

fn layout_stats(a: &LayoutArgs) -> Result<()> {
    validate_orders(&a.orders)?;
    let (mesh, _) = load_mesh(&a.mesh)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for &order in &a.orders {
        let opts = DiscretizationOptions { k_m: a.k_m, m_b: a.m_b, ..Default::default() };
        let d = Discretization::new(mesh.clone(), order, opts)?;
        let l = &d.layout;
        for b in &d.gather.blocks {
            w.serialize(LayoutRow {
                order,
                block: b.index.to_string(),
                elements: b.num_elements,
                intra: b.n_intra,
                inter: b.n_inter,
                boundary: b.n_boundary,
                descriptors: b.descriptors.len(),
                k_m: l.k_m,
                n_pm: l.n_pm,
                microblocks: (b.index * a.m_b..((b.index + 1) * a.m_b).min(l.n_m)).len(),
                waste: l.waste(),
            })?;
        }
        let (intra, inter, boundary) = d.gather.totals();
        w.serialize(LayoutRow {
            order,
            block: "total".into(),
            elements: d.num_elements(),
            intra,
            inter,
            boundary,
            descriptors: intra + inter + boundary,
            k_m: l.k_m,
            n_pm: l.n_pm,
            microblocks: l.n_m,
            waste: l.waste(),
        })?;
    }
    emit(a.output.as_deref(), &String::from_utf8(w.into_inner().map_err(|e| Error::Internal(e.to_string()))?).expect("csv is utf-8"))
}
