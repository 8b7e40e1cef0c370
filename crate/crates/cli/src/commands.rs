use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use dpwkit::basepoint::{
    compute_ring_g, conjugate_transport, dressed_transport, dual_frame_transport, involution_transport, AuditEntry,
    ConjugationMove, DressingMove, GaugeChoice,
};
use dpwkit::fd::DiffScheme;
use dpwkit::loopcore::json::MatrixJson;
use dpwkit::loopcore::MatrixLoop;
use dpwkit::pipeline::{associated_family, backward_dpw, forward_dpw, harmonicity_residuals, ExtendedFrameField, ForwardOptions};
use dpwkit::potential::{PotentialJson, PotentialOneForm};

use crate::config::RunConfig;
use crate::dump::{self, add_frame_dump, Outputs};
use crate::error::CliError;
use crate::moves::{Gauge, MoveJson, MoveType};
use crate::suite::{self, tol};

const BASEPOINT_MATCH: f64 = 1e-12;

/// Result of a command that ran to completion.
#[derive(Debug, Serialize)]
pub struct Outcome {
    pub command: String,
    pub status: String,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub failed: Vec<String>,
    #[serde(skip)]
    pub table: Option<String>,
}

impl Outcome {
    fn new(command: &str, out_dir: &Path, files: Vec<String>, entries: &[AuditEntry]) -> Self {
        let failed: Vec<String> = entries.iter().filter(|e| !e.pass).map(|e| e.name.clone()).collect();
        Self {
            command: command.into(),
            status: if failed.is_empty() { "pass" } else { "fail" }.into(),
            out_dir: out_dir.to_path_buf(),
            files,
            failed,
            table: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

fn finish(command: &str, out: Outputs, dir: &Path, entries: &[AuditEntry]) -> Result<Outcome, CliError> {
    out.write(dir)?;
    Ok(Outcome::new(command, dir, out.names(), entries))
}

fn add_flagged(out: &mut Outputs, flagged: &[dpwkit::pipeline::FlaggedPoint]) {
    if !flagged.is_empty() {
        out.add_json("flagged.json", &flagged);
    }
}

pub fn forward(cfg: &RunConfig, potential: &Path, dir: &Path) -> Result<Outcome, CliError> {
    let j: PotentialJson = dump::read_json(potential)?;
    let eta = PotentialOneForm::try_from(j).map_err(|e| CliError::from(e).in_file(potential))?;
    let model = cfg.group_model();
    let mut opts = ForwardOptions::new(cfg.truncation);
    opts.structural_tol = cfg.structural_tol;
    let fwd = forward_dpw(&eta, cfg.grid, &model, &opts)?;
    let lambdas = cfg.lambdas();
    let flatness = harmonicity_residuals(&fwd.frame, &lambdas, DiffScheme::default())?;
    let family = associated_family(&fwd.frame, &lambdas)?;
    let d = &fwd.diagnostics;

    let mut entries = vec![
        AuditEntry::new("forward.basepoint_drift", d.basepoint_drift, cfg.pipeline_tol),
        AuditEntry::new("forward.real_form", d.max_realform_violation, cfg.pipeline_tol),
        AuditEntry::new("forward.twisting", d.max_twist_violation, cfg.structural_tol),
        AuditEntry::new("forward.reconstruction", d.max_reconstruction, cfg.pipeline_tol),
        AuditEntry::new("forward.family_spectrum", family.spectrum_deviation, cfg.pipeline_tol),
    ];
    for (t, r) in cfg.lambda_samples.iter().zip(&flatness) {
        entries.push(AuditEntry::new(&format!("forward.flatness[lambda=e^(i*pi*{t})]"), *r, tol::FLATNESS));
    }
    let mut warnings = Vec::new();
    if d.max_tail > cfg.structural_tol {
        warnings.push(format!(
            "truncation tail {:.3e} exceeds {:.1e} at N = {}",
            d.max_tail, cfg.structural_tol, cfg.truncation
        ));
    }

    let mut out = Outputs::default();
    add_frame_dump(&mut out, "frames", &fwd.frame);
    out.add("associated_family.csv", dump::matrix_fields_csv(&family.values, model.size(), "p"));
    out.add_json(
        "flatness.json",
        &cfg.lambda_samples
            .iter()
            .zip(&flatness)
            .map(|(t, r)| json!({ "lambda_angle_over_pi": t, "residual": r }))
            .collect::<Vec<_>>(),
    );
    out.add_json(
        "diagnostics.json",
        &json!({
            "schema_version": crate::config::SCHEMA_VERSION,
            "forward": d,
            "associated_family": {
                "lambda_angles_over_pi": cfg.lambda_samples,
                "spectrum_deviation": family.spectrum_deviation,
                "basepoint_deviation": family.basepoint_deviation,
            },
            "audit": entries,
            "warnings": warnings,
            "flagged": fwd.frame.flagged,
        }),
    );
    add_flagged(&mut out, &fwd.frame.flagged);
    finish("forward", out, dir, &entries)
}

pub fn backward(cfg: &RunConfig, frames: &Path, dir: &Path) -> Result<Outcome, CliError> {
    let frame = dump::load_frame_dump(frames)?;
    let back = backward_dpw(&frame, DiffScheme::default())?;
    let a = &back.audit;
    let entries = vec![
        AuditEntry::new("backward.mode_minus_one_only", a.mode_leak, cfg.pipeline_tol),
        AuditEntry::new("backward.dz_only", a.dzbar_mass, cfg.pipeline_tol),
        AuditEntry::new("backward.p_valued", a.p_violation, cfg.pipeline_tol),
        AuditEntry::new("backward.normalized_at_basepoint", a.basepoint_residual.unwrap_or(0.0), cfg.structural_tol),
        AuditEntry::new("backward.reconstruction", a.max_reconstruction, cfg.pipeline_tol),
    ];
    let mut flagged = frame.flagged.clone();
    flagged.extend(back.flagged.iter().cloned());
    let mut out = Outputs::default();
    out.add("potential.csv", dump::matrix_field_csv(&back.potential.xi, frame.model.size(), "xi"));
    out.add_json(
        "audit.json",
        &json!({
            "schema_version": crate::config::SCHEMA_VERSION,
            "basepoint": [frame.basepoint.re, frame.basepoint.im],
            "backward": a,
            "audit": entries,
            "flagged": flagged,
        }),
    );
    add_flagged(&mut out, &flagged);
    finish("backward", out, dir, &entries)
}

fn load_move(path: &Path, frame: &ExtendedFrameField) -> Result<MoveJson, CliError> {
    let mv: MoveJson = dump::read_json(path)?;
    mv.validate().map_err(|e| e.in_file(path))?;
    let dz = (mv.z_source() - frame.basepoint).norm();
    if dz > BASEPOINT_MATCH {
        return Err(CliError::from(dpwkit::DpwError::InvalidMove {
            reason: "z_source is not the base point of the frame dump".into(),
            residual: dz,
        })
        .in_file(path));
    }
    Ok(mv)
}

fn dressing_move(mv: &MoveJson, f0: &ExtendedFrameField, path: &Path) -> Result<DressingMove, CliError> {
    let n = f0.model.size();
    let Gauge::Matrix(k0) = mv.gauge(n).map_err(|e| e.in_file(path))? else {
        unreachable!("named gauges are rejected for dressing moves")
    };
    match &mv.ring_g {
        None => Ok(compute_ring_g(f0, mv.z_target(), &k0, tol::MOVE)?),
        Some(g) => {
            let ring_g = MatrixLoop::try_from(g.clone()).map_err(|e| CliError::from(e).in_file(path))?;
            if ring_g.size() != n {
                return Err(CliError::schema(format!("ring_g is {0}x{0}, frames are {n}x{n}", ring_g.size())).in_file(path));
            }
            let ring_g = ring_g.resized(f0.bound);
            let mut m = DressingMove::from_ring_g(ring_g, f0.basepoint, mv.z_target(), k0.clone(), &f0.model)?;
            m.diagnostics.construction_residual = match f0.at(mv.z_target()) {
                Some(f) => m
                    .ring_g
                    .multiply(&f.right_mul(&k0))?
                    .max_coeff_dist(&MatrixLoop::identity(n, f0.bound)),
                None => f64::NAN,
            };
            Ok(m)
        }
    }
}

pub fn transport(cfg: &RunConfig, frames: &Path, move_path: &Path, dir: &Path) -> Result<Outcome, CliError> {
    let f0 = dump::load_frame_dump(frames)?;
    let mv = load_move(move_path, &f0)?;
    let n = f0.model.size();
    let mut out = Outputs::default();
    match mv.move_type {
        MoveType::Conjugation => {
            let gauge = match mv.gauge(n).map_err(|e| e.in_file(move_path))? {
                Gauge::Matrix(k) => GaugeChoice::Constant(k),
                Gauge::NormalizeAtTarget => GaugeChoice::NormalizeAtTarget,
            };
            let cm = match &mv.h {
                Some(h) => ConjugationMove::new(h.to_matrix()?, &f0, mv.z_target(), gauge, tol::MOVE)?,
                None => ConjugationMove::synthesize(&f0, mv.z_target(), gauge, tol::MOVE)?,
            };
            let inv = involution_transport(&cm, tol::INVOLUTIONS)?;
            let res = conjugate_transport(&f0, &cm, tol::MOVE)?;
            let mut entries = res.audit.entries(cfg.structural_tol, cfg.pipeline_tol);
            entries.push(AuditEntry::new("involutions.pairwise_commutation", inv.commutation_residual, tol::INVOLUTIONS));
            entries.push(AuditEntry::new("involutions.involutivity", inv.involutivity_residual, tol::INVOLUTIONS));
            add_frame_dump(&mut out, "transported", &res.frame);
            out.add_json(
                "audit.json",
                &json!({
                    "schema_version": crate::config::SCHEMA_VERSION,
                    "type": "conjugation",
                    "h": MatrixJson::from(&cm.h),
                    "k0": MatrixJson::from(&res.k0),
                    "z_source": mv.z_source,
                    "z_target": mv.z_target,
                    "move": { "orbit_residual": cm.orbit_residual, "realform_residual": cm.realform_residual },
                    "sigma1": MatrixJson::from(inv.sigma.matrix()),
                    "theta1": MatrixJson::from(inv.theta.matrix()),
                    "conjugation": res.audit,
                    "audit": entries,
                }),
            );
            add_flagged(&mut out, &res.audit.flagged);
            finish("transport", out, dir, &entries)
        }
        MoveType::Dressing => {
            let dm = dressing_move(&mv, &f0, move_path)?;
            let res = dressed_transport(&f0, &dm, cfg.pipeline_tol)?;
            let entries = res.audit.entries(cfg.structural_tol, cfg.pipeline_tol, tol::MIN_AGREEMENT_FRACTION);
            add_frame_dump(&mut out, "transported", &res.frame);
            out.add("normalized_dressing.csv", dump::loop_field_csv(&res.minus_dressing, n, f0.bound));
            out.add("normalized_direct.csv", dump::loop_field_csv(&res.minus_direct, n, f0.bound));
            if let Some(p) = &res.potential {
                out.add("potential.csv", dump::matrix_field_csv(&p.xi, n, "xi"));
            }
            out.add_json(
                "audit.json",
                &json!({
                    "schema_version": crate::config::SCHEMA_VERSION,
                    "type": "dressing",
                    "ring_g": &dm.ring_g,
                    "z_source": mv.z_source,
                    "z_target": mv.z_target,
                    "move": dm.diagnostics,
                    "dressing": res.audit,
                    "audit": entries,
                }),
            );
            add_flagged(&mut out, &res.audit.flagged);
            finish("transport", out, dir, &entries)
        }
    }
}

pub fn dual(_cfg: &RunConfig, frames: &Path, move_path: &Path, dir: &Path) -> Result<Outcome, CliError> {
    let f0 = dump::load_frame_dump(frames)?;
    let mv = load_move(move_path, &f0)?;
    if mv.move_type != MoveType::Dressing {
        return Err(CliError::schema("dual frames need a dressing move").in_file(move_path));
    }
    let n = f0.model.size();
    let dm = dressing_move(&mv, &f0, move_path)?;
    let f2 = dressed_transport(&f0, &dm, tol::ROUTE_AGREEMENT)?.frame;
    let res = dual_frame_transport(&f0, &f2, &dm)?;
    let entries = vec![AuditEntry::new("dual.w_plus_negative_mass", res.audit.max_negative_mass, tol::W_PLUS_NEGATIVE_MASS)];
    let mut out = Outputs::default();
    out.add("dual_f0.csv", dump::loop_field_csv(&res.f0_u, n, f0.bound));
    out.add("dual_f2.csv", dump::loop_field_csv(&res.f2_u, n, f0.bound));
    out.add("w_plus.csv", dump::loop_field_csv(&res.w_plus, n, f0.bound));
    out.add_json(
        "audit.json",
        &json!({
            "schema_version": crate::config::SCHEMA_VERSION,
            "dual": res.audit,
            "audit": entries,
        }),
    );
    add_flagged(&mut out, &res.audit.flagged);
    finish("dual", out, dir, &entries)
}

pub fn verify(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let report = suite::run(cfg);
    let table = report.table();
    let mut out = Outputs::default();
    out.add_json("report.json", &report);
    out.add("report.txt", table.clone());
    out.write(dir)?;
    let failed = report.checks.iter().filter(|c| !c.pass).map(|c| c.id.clone()).collect::<Vec<_>>();
    Ok(Outcome {
        command: "verify".into(),
        status: if failed.is_empty() { "pass" } else { "fail" }.into(),
        out_dir: dir.to_path_buf(),
        files: out.names(),
        failed,
        table: Some(table),
    })
}
