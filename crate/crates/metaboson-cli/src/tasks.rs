//! Task drivers. Each task computes every output in memory and returns the
//! files; nothing touches the disk until the whole run succeeded.

use std::collections::BTreeMap;

use metaboson::correlations::{self, CorrelationKind};
use metaboson::dynamics;
use metaboson::lattice::{self, AssembledSystem, BoundaryCondition};
use metaboson::models::make_pure_ss_dbkc;
use metaboson::modes::{self, Edge, MajoranaPair, ModeKind, Normalization};
use metaboson::pseudospectral::{self, Region};
use metaboson::spectral;
use num_complex::Complex64 as C;
use rayon::prelude::*;

use crate::config::{build_preset, complete_params, Model, Origin, Resolved, Task};
use crate::output::{num, Csv, OutFile};
use crate::AppError;

type TaskResult = Result<Vec<OutFile>, AppError>;

pub fn run(r: &Resolved, origin: &Origin) -> TaskResult {
    match r.config.task {
        Task::Spectrum => spectrum(r),
        Task::PhaseDiagram => phase_diagram(r, origin),
        Task::Modes => modes_task(r),
        Task::Correlate => correlate(r),
        Task::Parity => parity(r),
        Task::Pseudospec => pseudospec(r),
        Task::Transient => transient(r),
    }
}

fn model(r: &Resolved) -> &Model {
    r.model.as_ref().expect("model built for this task")
}

fn system(r: &Resolved, bc: BoundaryCondition, n: usize) -> metaboson::Result<AssembledSystem> {
    match model(r) {
        Model::Bulk(b) => lattice::assemble(b, bc, n),
        Model::PureSs => {
            let p = &r.config.params;
            Ok(make_pure_ss_dbkc(p["j"], p["delta"], p["kappa"], n)?.system)
        }
    }
}

/// Comment lines shared by every CSV of a run.
fn header(r: &Resolved, what: &str) -> Vec<String> {
    let c = &r.config;
    let params = c.params.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect::<Vec<_>>().join(" ");
    let sizes = c.sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
    vec![
        format!("metaboson {} task={} model={} bc={} N={sizes} seed={}", env!("CARGO_PKG_VERSION"), c.task.as_str(), c.model, c.bc, c.seed),
        if params.is_empty() { "params: (custom bulk model)".into() } else { format!("params: {params}") },
        what.to_string(),
    ]
}

fn csv_file(name: impl Into<String>, description: &str, csv: Csv) -> OutFile {
    OutFile { name: name.into(), description: description.into(), contents: csv.finish() }
}

fn edge_str(e: Edge) -> &'static str {
    match e {
        Edge::Left => "left",
        Edge::Right => "right",
        Edge::Unlocalized => "unlocalized",
    }
}

fn kind_str(k: ModeKind) -> &'static str {
    match k {
        ModeKind::ZM => "zm",
        ModeKind::SG => "sg",
        ModeKind::NonSplit => "nonsplit",
    }
}

fn spectrum(r: &Resolved) -> TaskResult {
    let mut files = Vec::new();
    if let Some(b) = model(r).bulk() {
        let nk = r.usize_opt("nk");
        let bands = spectral::rapidity_bands(b, nk)?;
        let what = if bands.tracked {
            "rapidity bands of the Bloch symbol, one curve per band"
        } else {
            "rapidity bands as an unsorted point cloud (band tracking failed)"
        };
        let mut csv = Csv::new(&header(r, what), &["band", "k", "re", "im"]);
        for (bi, band) in bands.bands.iter().enumerate() {
            for (k, z) in bands.k_grid.iter().zip(band) {
                csv.row(&[bi.to_string(), num(*k), num(z.re), num(z.im)]);
            }
        }
        files.push(csv_file("bands.csv", what, csv));
    }
    let pbc = model(r).bulk().is_some();
    let what = if pbc { "rapidities of open and periodic chains" } else { "rapidities of the open chain" };
    let mut csv = Csv::new(&header(r, what), &["N", "bc", "index", "re", "im"]);
    for &n in &r.config.sizes {
        let mut bcs = vec![BoundaryCondition::Obc];
        if pbc {
            bcs.push(BoundaryCondition::Pbc);
        }
        for bc in bcs {
            let ev = spectral::spectrum(&system(r, bc, n)?)?;
            for (i, z) in ev.iter().enumerate() {
                csv.row(&[n.to_string(), bc.as_str().into(), i.to_string(), num(z.re), num(z.im)]);
            }
        }
    }
    files.push(csv_file("rapidities.csv", what, csv));
    Ok(files)
}

struct Point {
    n: usize,
    x: f64,
    y: Option<f64>,
}

fn phase_diagram(r: &Resolved, origin: &Origin) -> TaskResult {
    let xa = r.axis(origin, "x")?;
    let ya = if r.grid("y").is_some() { Some(r.axis(origin, "y")?) } else { None };
    let mut points = Vec::new();
    for &n in &r.config.sizes {
        for &y in ya.as_ref().map(|a| a.values.iter().map(|&v| Some(v)).collect()).unwrap_or_else(|| vec![None]).iter() {
            for &x in &xa.values {
                points.push(Point { n, x, y });
            }
        }
    }
    let model_name = r.config.model.clone();
    let eval = |p: &Point| -> Result<(String, bool, String, String, String, String), String> {
        let mut params: BTreeMap<String, f64> = r.config.params.clone();
        params.insert(xa.param.clone(), p.x);
        if let (Some(a), Some(y)) = (&ya, p.y) {
            params.insert(a.param.clone(), y);
        }
        complete_params(&model_name, &mut params);
        let bulk = build_preset(&model_name, &params).bulk().map_err(|e| e.to_string())?.expect("bulk preset");
        let pc = spectral::classify_phase(&bulk, p.n).map_err(|e| e.to_string())?;
        let windings = pc.windings.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(";");
        let winding_bands = pc.windings.iter().filter(|&&w| w != 0).count().to_string();
        let (og, sg) = pc.gaps.map(|g| (num(g.obc_gap), num(g.sibc_gap))).unwrap_or_default();
        Ok((pc.tag.as_str().to_string(), pc.critical, windings, winding_bands, og, sg))
    };
    let rows: Vec<Result<_, String>> = points.par_iter().map(eval).collect();

    let what = "dynamical phase per sweep point; failed points are IllDefined with the reason in note";
    let mut cols = vec!["N", xa.param.as_str()];
    if let Some(a) = &ya {
        cols.push(a.param.as_str());
    }
    cols.extend(["tag", "critical", "windings", "winding_bands", "obc_gap", "sibc_gap", "note"]);
    let mut csv = Csv::new(&header(r, what), &cols);
    for (p, row) in points.iter().zip(rows) {
        let mut f = vec![p.n.to_string(), num(p.x)];
        if let Some(y) = p.y {
            f.push(num(y));
        }
        match row {
            Ok((tag, crit, w, wb, og, sg)) => f.extend([tag, crit.to_string(), w, wb, og, sg, String::new()]),
            Err(e) => f.extend(["IllDefined".into(), "false".into(), String::new(), String::new(), String::new(), String::new(), e]),
        }
        csv.row(&f);
    }
    Ok(vec![csv_file("phase.csv", what, csv)])
}

fn normalization(r: &Resolved) -> Normalization {
    match r.grid("norm") {
        Some("unit-zm") => Normalization::UnitZM,
        _ => Normalization::Symmetric,
    }
}

fn pairs_for(r: &Resolved, sys: &AssembledSystem) -> metaboson::Result<Vec<MajoranaPair>> {
    let found = modes::extract_modes(sys, r.f64_opt("frac"))?;
    modes::pair_and_normalize_on(sys, &found, normalization(r))
}

fn modes_task(r: &Resolved) -> TaskResult {
    let mut files = Vec::new();
    let what = "Majorana pairs with residuals ‖G̃γz‖, ‖Gγs‖ and commutators [γz, γs]";
    let mut csv = Csv::new(
        &header(r, what),
        &[
            "N", "pair", "zm_kind", "zm_edge", "sg_kind", "sg_edge", "zm_residual", "sg_residual", "commutator_re", "commutator_im",
            "raw_commutator_re", "raw_commutator_im",
        ],
    );
    for &n in &r.config.sizes {
        let sys = system(r, r.bc, n)?;
        let pairs = pairs_for(r, &sys)?;
        for (i, p) in pairs.iter().enumerate() {
            let zr = modes::residuals(&p.zm.vector, &sys).zm_residual;
            let sr = modes::residuals(&p.sg.vector, &sys).sg_residual;
            csv.row(&[
                n.to_string(),
                i.to_string(),
                kind_str(p.zm.kind).into(),
                edge_str(p.zm.edge).into(),
                kind_str(p.sg.kind).into(),
                edge_str(p.sg.edge).into(),
                num(zr),
                num(sr),
                num(p.commutator.re),
                num(p.commutator.im),
                num(p.raw_commutator.re),
                num(p.raw_commutator.im),
            ]);
            for (role, m) in [("zm", &p.zm), ("sg", &p.sg)] {
                let mut body = modes::mode_to_json(m);
                body.push('\n');
                files.push(OutFile {
                    name: format!("mode_N{n}_pair{i}_{role}.json"),
                    description: format!("{role} member of pair {i} at N={n}, {} edge", edge_str(m.edge)),
                    contents: body,
                });
            }
        }
    }
    files.push(csv_file("pairs.csv", what, csv));
    Ok(files)
}

fn correlate(r: &Resolved) -> TaskResult {
    let kind = if r.grid("kind") == Some("ss") { CorrelationKind::SteadyState } else { CorrelationKind::Quantum };
    let label = if kind == CorrelationKind::Quantum { "C^qu" } else { "C^ss" };
    let taus = r.list_opt("tau").expect("default tau");
    let omegas = r.list_opt("omega");
    let mut files = Vec::new();
    for &n in &r.config.sizes {
        let sys = system(r, r.bc, n)?;
        let ss = match kind {
            CorrelationKind::SteadyState => Some(dynamics::steady_covariance(&sys)?),
            CorrelationKind::Quantum => None,
        };
        let pairs = pairs_for(r, &sys)?;
        for (a, pa) in pairs.iter().enumerate() {
            for (b, pb) in pairs.iter().enumerate() {
                let (alpha, beta) = (&pa.zm.vector, &pb.sg.vector);
                let (series, at_zero) = match &ss {
                    None => (
                        correlations::quantum_correlation(&sys, alpha, beta, &taus)?,
                        correlations::quantum_correlation_at_zero(alpha, beta),
                    ),
                    Some(ss) => (
                        correlations::steady_correlation_with(&sys, ss, alpha, beta, &taus)?,
                        correlations::steady_correlation_with(&sys, ss, alpha, beta, &[0.0])?.values[0],
                    ),
                };
                let tag = format!("N{n}_z{a}-{}_s{b}-{}", edge_str(pa.zm.edge), edge_str(pb.sg.edge));
                let what = format!(
                    "{label}(γz[{a}], γs[{b}])(τ) with γz on the {} edge and γs on the {} edge; norm = value / value at τ=0",
                    edge_str(pa.zm.edge),
                    edge_str(pb.sg.edge)
                );
                let mut csv = Csv::new(&header(r, &what), &["tau", "re", "im", "norm_re", "norm_im"]);
                let normed: Vec<C> = if at_zero.norm() > 0.0 {
                    series.normalized(at_zero)
                } else {
                    vec![C::new(f64::NAN, f64::NAN); taus.len()]
                };
                for ((t, v), w) in taus.iter().zip(&series.values).zip(&normed) {
                    csv.row(&[num(*t), num(v.re), num(v.im), num(w.re), num(w.im)]);
                }
                files.push(csv_file(format!("corr_{tag}.csv"), &what, csv));
                if let Some(om) = &omegas {
                    let s = correlations::power_spectra(&sys, alpha, beta, om, kind, false)?;
                    let what = format!("power spectrum of {label}(γz[{a}], γs[{b}]); singular samples are nan");
                    let mut csv = Csv::new(&header(r, &what), &["omega", "re", "im", "flagged"]);
                    for (i, (w, v)) in om.iter().zip(&s.values).enumerate() {
                        csv.row(&[num(*w), num(v.re), num(v.im), s.flagged.contains(&i).to_string()]);
                    }
                    files.push(csv_file(format!("spec_{tag}.csv"), &what, csv));
                }
            }
        }
    }
    Ok(files)
}

fn parity(r: &Resolved) -> TaskResult {
    let p = &r.config.params;
    let (j, delta, kappa) = (p["j"], p["delta"], p["kappa"]);
    let theta = r.f64_opt("theta");
    let phis = r.list_opt("phi").expect("default phi");
    let ts = r.list_opt("t").expect("default t");
    let what = "cat-state parity ⟨P⟩(t) of the quasi-steady state generated by each soft gap (θ scales ‖α‖²)";
    let mut csv = Csv::new(&header(r, what), &["N", "edge", "alpha_norm_sq", "phi", "t", "parity"]);
    for &n in &r.config.sizes {
        let model = make_pure_ss_dbkc(j, delta, kappa, n)?;
        let pairs = pairs_for(r, &model.system)?;
        let mut sgs: Vec<_> = pairs.iter().map(|q| &q.sg).filter(|m| m.kind != ModeKind::ZM).collect();
        sgs.sort_by_key(|m| edge_str(m.edge));
        for sg in sgs {
            let amps = dynamics::normal_mode_amplitudes(&model.normal_modes, &sg.vector, theta);
            let a2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
            for &phi in &phis {
                let vals = dynamics::cat_parity(a2, phi, kappa, &ts)?;
                for (t, v) in ts.iter().zip(vals) {
                    csv.row(&[n.to_string(), edge_str(sg.edge).into(), num(a2), num(phi), num(*t), num(v)]);
                }
            }
        }
    }
    Ok(vec![csv_file("parity.csv", what, csv)])
}

fn pseudospec(r: &Resolved) -> TaskResult {
    let (nx, ny) = (r.usize_opt("nx"), r.usize_opt("ny"));
    let mut files = Vec::new();
    for &n in &r.config.sizes {
        let sys = system(r, r.bc, n)?;
        let region = match (r.range_opt("re"), r.range_opt("im")) {
            (Some((re_min, re_max)), Some((im_min, im_max))) => Region { re_min, re_max, im_min, im_max },
            _ => pseudospectral::default_region(&sys)?,
        };
        let g = pseudospectral::pseudospectrum_grid(&sys, region, nx, ny)?;
        let what = format!("s_min(−iG − λ) on a {nx}×{ny} grid at N={n}");
        let mut csv = Csv::new(&header(r, &what), &["re", "im", "s_min"]);
        for (iy, im) in g.im.iter().enumerate() {
            for (ix, re) in g.re.iter().enumerate() {
                csv.row(&[num(*re), num(*im), num(g.values[iy][ix])]);
            }
        }
        files.push(csv_file(format!("pseudospec_N{n}.csv"), &what, csv));
    }
    Ok(files)
}

fn transient(r: &Resolved) -> TaskResult {
    let mode = r.usize_opt("mode");
    let samples = r.usize_opt("samples");
    let ts = r.list_opt("t").expect("default t");
    let mut files = Vec::new();
    for &n in &r.config.sizes {
        let sys = system(r, r.bc, n)?;
        let tr = dynamics::ensemble_transient(&sys, mode, samples, &ts, r.config.seed)?;
        let what = format!("mean and spread of |⟨x_{mode}⟩(t)| over {samples} random coherent initial states at N={n}");
        let mut csv = Csv::new(&header(r, &what), &["t", "mean", "std"]);
        for ((t, m), s) in tr.times.iter().zip(&tr.mean).zip(&tr.std) {
            csv.row(&[num(*t), num(*m), num(*s)]);
        }
        files.push(csv_file(format!("transient_N{n}.csv"), &what, csv));
    }
    Ok(files)
}
