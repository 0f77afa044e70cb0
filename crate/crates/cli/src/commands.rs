//! Subcommand implementations wiring generation, calibration, refinement,
//! integration and evaluation.

use crate::config::PipelineConfig;
use anyhow::{anyhow, Context};
use nearps::calib::{calibrate_lights, CalibrationProblem, LightsFile};
use nearps::dataset::{
    base_light_positions, generate_corpus, load_record, read_manifest, LoadedRecord, SampleSpec,
};
use nearps::eval::{
    angular_error, cosine_normal_error, point_to_point_error, write_error_map_png,
    write_error_map_pfm, ErrorMap,
};
use nearps::geometry::{
    read_obj, toy_model, write_container, write_obj, PointLight, ToyModelParams,
};
use nearps::integrate::{
    heightfield_to_mesh, induced_normal_map, integrate, rasterize_height_field,
    rasterize_target_normals, HeightField,
};
use nearps::refine::refine;
use nearps::render::{render, write_pfm, write_png_preview, PfmImage, RenderOptions, Shading};
use nearps::Vec3;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Failure carrying its exit code: 2 for usage/input problems, 1 for
/// internal or numerical failures.
#[derive(Debug)]
pub enum CmdError {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Usage(_) => 2,
            CmdError::Internal(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            CmdError::Usage(e) | CmdError::Internal(e) => e,
        }
    }
}

impl From<crate::config::ConfigError> for CmdError {
    fn from(e: crate::config::ConfigError) -> Self {
        CmdError::Usage(e.into())
    }
}

fn usage<E: Into<anyhow::Error>>(e: E) -> CmdError {
    CmdError::Usage(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> CmdError {
    CmdError::Internal(e.into())
}

/// `make-model`: write the procedural toy face model container.
pub fn cmd_make_model(out: &Path, seed: u64, grid: Option<(usize, usize)>) -> Result<(), CmdError> {
    let mut params = ToyModelParams::default();
    if let Some(g) = grid {
        if g.0 < 4 || g.1 < 4 {
            return Err(usage(anyhow!("grid must be at least 4x4, got {}x{}", g.0, g.1)));
        }
        params.grid = g;
    }
    let model = toy_model(seed, &params);
    write_container(out, &model.to_container()).map_err(internal)?;
    println!(
        "wrote model: {} vertices, {} triangles -> {}",
        model.n_vertices(),
        model.triangles.len(),
        out.display()
    );
    Ok(())
}

fn load_model(config: &PipelineConfig) -> Result<nearps::geometry::LinearFaceModel, CmdError> {
    config.require_model()?;
    let container = nearps::geometry::read_container(&config.model).map_err(usage)?;
    let model = nearps::geometry::LinearFaceModel::from_container(&container).map_err(usage)?;
    model.validate().map_err(usage)?;
    Ok(model)
}

/// `generate`: sample and persist the corpus.
pub fn cmd_generate(config: &PipelineConfig, dry_run: bool) -> Result<(), CmdError> {
    let specs: Vec<SampleSpec> = (0..config.records)
        .map(|i| SampleSpec {
            seed: config.record_seed(i),
            ..config.sample.clone()
        })
        .collect();
    if dry_run {
        println!(
            "dry run: would generate {} records at {}x{} px with {} lights into {}",
            specs.len(),
            config.sample.image_size,
            config.sample.image_size,
            config.sample.n_lights,
            config.corpus.display()
        );
        return Ok(());
    }
    let model = load_model(config)?;
    let manifest = generate_corpus(&model, &specs, &config.corpus).map_err(internal)?;
    println!(
        "manifest: {} ({} records)",
        config.corpus.join("manifest.json").display(),
        manifest.records.len()
    );
    Ok(())
}

fn record_dir(config: &PipelineConfig, record_id: &str) -> Result<PathBuf, CmdError> {
    config.require_corpus()?;
    let dir = config.corpus.join(record_id);
    if !dir.join("meta.json").is_file() {
        return Err(usage(anyhow!(
            "unknown record id `{record_id}` under {}",
            config.corpus.display()
        )));
    }
    Ok(dir)
}

/// Output filename suffix for a light subset: empty when all lights are
/// used, `_s1` style otherwise.
fn subset_suffix(subset: &[usize], n_lights: usize) -> String {
    if subset.len() == n_lights {
        String::new()
    } else {
        let names: Vec<String> = subset.iter().map(|i| format!("s{}", i + 1)).collect();
        format!("_{}", names.join(""))
    }
}

struct StageLog {
    file: std::io::BufWriter<std::fs::File>,
}

impl StageLog {
    fn create(path: &Path) -> Result<Self, CmdError> {
        let file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(internal)?;
        Ok(StageLog {
            file: std::io::BufWriter::new(file),
        })
    }

    fn log_trace(&mut self, stage: &str, trace: &[f64]) -> Result<(), CmdError> {
        for (iter, objective) in trace.iter().enumerate() {
            let line = serde_json::json!({
                "stage": stage,
                "iter": iter,
                "objective": objective,
            });
            writeln!(self.file, "{line}").map_err(internal)?;
        }
        self.file.flush().map_err(internal)?;
        Ok(())
    }
}

fn select_subset(
    config: &PipelineConfig,
    record: &LoadedRecord,
    subset_names: Option<&[String]>,
) -> Result<Vec<usize>, CmdError> {
    let names: Vec<String> = match subset_names {
        Some(n) => n.to_vec(),
        None => config.lights_subset.clone(),
    };
    Ok(config.subset_indices(&names, record.lights.len())?)
}

/// Nominal rig lights used to initialize calibration: base positions around
/// the face center at the configured rig distance, inverse-square betas.
fn nominal_rig(config: &PipelineConfig, record: &LoadedRecord, subset: &[usize]) -> Vec<PointLight> {
    let center = record.pose.translation;
    let base = base_light_positions(record.lights.len(), center, config.sample.base_distance_mm);
    subset
        .iter()
        .map(|&j| {
            let d = (center - base[j]).norm();
            PointLight::new(base[j], 0.9 * d * d)
        })
        .collect()
}

fn calibrate_stage(
    config: &PipelineConfig,
    record: &LoadedRecord,
    subset: &[usize],
    log: &mut StageLog,
) -> Result<Vec<PointLight>, CmdError> {
    let problem = CalibrationProblem {
        proxy: record.proxy_mesh.clone(),
        pose: record.pose,
        cam: record.cam,
        observations: subset.iter().map(|&j| record.images[j].clone()).collect(),
        initial_lights: nominal_rig(config, record, subset),
    };
    let (lights, report) = calibrate_lights(&problem, &config.calibration).map_err(internal)?;
    for (outer, trace) in report.objective_trace.iter().enumerate() {
        log.log_trace(&format!("calibrate_outer{outer}"), trace)?;
    }
    println!(
        "calibration rms residual {:.3e} over {} residuals",
        report.rms_residual, report.n_residuals
    );
    Ok(lights)
}

/// `reconstruct`: calibrate (unless lights are known), refine, transfer
/// normals, integrate, export mesh.
pub fn cmd_reconstruct(
    config: &PipelineConfig,
    record_id: &str,
    subset_names: Option<&[String]>,
    lights_known: bool,
) -> Result<(), CmdError> {
    let dir = record_dir(config, record_id)?;
    let record = load_record(&dir).map_err(usage)?;
    let subset = select_subset(config, &record, subset_names)?;
    let suffix = subset_suffix(&subset, record.lights.len());
    let mut log = StageLog::create(&dir.join(format!("recon{suffix}_log.jsonl")))?;

    let lights = if lights_known {
        subset.iter().map(|&j| record.lights[j]).collect()
    } else {
        calibrate_stage(config, &record, &subset, &mut log)?
    };
    let lights_path = dir.join(format!("recon{suffix}_lights.json"));
    let lights_json = serde_json::to_vec_pretty(&LightsFile::from_lights(&lights))
        .map_err(internal)?;
    std::fs::write(&lights_path, lights_json).map_err(internal)?;

    let observations: Vec<_> = subset.iter().map(|&j| record.images[j].clone()).collect();
    let outcome = refine(
        &record.proxy_mesh,
        &record.pose,
        &record.cam,
        &observations,
        &lights,
        &config.refinement,
    )
    .map_err(internal)?;
    log.log_trace("refine", &outcome.objective_trace)?;

    let target = rasterize_target_normals(&outcome.state, &record.proxy_mesh, &record.pose, &record.cam)
        .map_err(internal)?;
    let z0 = rasterize_height_field(&record.proxy_mesh, &record.pose, &record.cam)
        .map_err(internal)?;
    let target = target.restricted_to(&z0.mask);
    let result = integrate(
        &target,
        &z0,
        config.integration.w1,
        config.integration.w2,
        &config.integration.settings,
    )
    .map_err(internal)?;
    log.log_trace("integrate", &result.objective_trace)?;
    if !result.converged {
        eprintln!("warning: height-field solve stopped before reaching its tolerance");
    }

    let mesh = heightfield_to_mesh(&result.height).map_err(internal)?;
    write_pfm(
        &dir.join(format!("recon{suffix}_normals.pfm")),
        &PfmImage::from_rgb(target.width, target.height, &target.normals),
    )
    .map_err(internal)?;
    write_pfm(
        &dir.join(format!("recon{suffix}_depth.pfm")),
        &PfmImage::from_gray(result.height.width, result.height.height, &result.height.depth),
    )
    .map_err(internal)?;
    write_obj(&dir.join(format!("recon{suffix}_mesh.obj")), &mesh).map_err(internal)?;
    println!(
        "reconstructed {record_id}{suffix}: {} visible triangles, {} masked pixels",
        outcome.state.visible_set.len(),
        result.height.mask_count()
    );
    Ok(())
}

/// `calibrate`: standalone light calibration for a record.
pub fn cmd_calibrate(
    config: &PipelineConfig,
    record_id: &str,
    subset_names: Option<&[String]>,
) -> Result<(), CmdError> {
    let dir = record_dir(config, record_id)?;
    let record = load_record(&dir).map_err(usage)?;
    let subset = select_subset(config, &record, subset_names)?;
    let suffix = subset_suffix(&subset, record.lights.len());
    let problem = CalibrationProblem {
        proxy: record.proxy_mesh.clone(),
        pose: record.pose,
        cam: record.cam,
        observations: subset.iter().map(|&j| record.images[j].clone()).collect(),
        initial_lights: nominal_rig(config, &record, &subset),
    };
    let (lights, report) = calibrate_lights(&problem, &config.calibration).map_err(internal)?;
    let lights_path = dir.join(format!("recon{suffix}_lights.json"));
    std::fs::write(
        &lights_path,
        serde_json::to_vec_pretty(&LightsFile::from_lights(&lights)).map_err(internal)?,
    )
    .map_err(internal)?;
    let report_path = dir.join(format!("calib{suffix}_report.json"));
    std::fs::write(
        &report_path,
        serde_json::to_vec_pretty(&report).map_err(internal)?,
    )
    .map_err(internal)?;
    println!(
        "calibrated {} lights, rms residual {:.3e} -> {}",
        lights.len(),
        report.rms_residual,
        lights_path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluationReport {
    record: String,
    subset: Vec<String>,
    angular_mean_deg: f64,
    angular_median_deg: f64,
    angular_rms_deg: f64,
    cosine_error: f64,
    point_to_point_mean_mm: f64,
    point_to_point_median_mm: f64,
    point_to_point_rms_mm: f64,
}

fn evaluate_record(
    config: &PipelineConfig,
    record_id: &str,
    subset_names: Option<&[String]>,
    self_check: bool,
) -> Result<EvaluationReport, CmdError> {
    let dir = record_dir(config, record_id)?;
    let record = load_record(&dir).map_err(usage)?;
    let subset = select_subset(config, &record, subset_names)?;
    let suffix = subset_suffix(&subset, record.lights.len());

    let (est_normals, est_mesh) = if self_check {
        (record.gt_normals.clone(), record.gt_mesh.clone())
    } else {
        let depth_path = dir.join(format!("recon{suffix}_depth.pfm"));
        let mesh_path = dir.join(format!("recon{suffix}_mesh.obj"));
        if !depth_path.is_file() || !mesh_path.is_file() {
            return Err(usage(anyhow!(
                "reconstruction outputs missing for {record_id}{suffix}; run `reconstruct` first"
            )));
        }
        let pfm = nearps::render::read_pfm(&depth_path).map_err(usage)?;
        let depth = pfm.to_gray().map_err(usage)?;
        let mask: Vec<bool> = depth.iter().map(|d| *d > 0.0).collect();
        let height = HeightField::new(pfm.width, pfm.height, depth, mask, record.cam)
            .map_err(internal)?;
        (induced_normal_map(&height), read_obj(&mesh_path).map_err(usage)?)
    };

    let angular = angular_error(&est_normals, &record.gt_normals).map_err(internal)?;
    let cosine = cosine_normal_error(&est_normals, &record.gt_normals).map_err(internal)?;
    let p2p = point_to_point_error(&est_mesh, &record.gt_mesh).map_err(internal)?;

    if let ErrorMap::Pixels(map) = &angular.map {
        write_error_map_pfm(&dir.join(format!("angular{suffix}.pfm")), map).map_err(internal)?;
        // Fixed scale: 0..10 degrees.
        write_error_map_png(&dir.join(format!("angular{suffix}.png")), map, 0.0, 10.0)
            .map_err(internal)?;
    }

    let report = EvaluationReport {
        record: record_id.to_string(),
        subset: subset.iter().map(|i| format!("S{}", i + 1)).collect(),
        angular_mean_deg: angular.mean,
        angular_median_deg: angular.median,
        angular_rms_deg: angular.rms,
        cosine_error: cosine,
        point_to_point_mean_mm: p2p.mean,
        point_to_point_median_mm: p2p.median,
        point_to_point_rms_mm: p2p.rms,
    };
    let report_name = if self_check {
        format!("evaluation{suffix}_self.json")
    } else {
        format!("evaluation{suffix}.json")
    };
    let report_path = dir.join(report_name);
    std::fs::write(
        &report_path,
        serde_json::to_vec_pretty(&report).map_err(internal)?,
    )
    .map_err(internal)?;
    println!(
        "{record_id}{suffix}: angular mean {:.4} deg, cosine {:.6}, p2p mean {:.4} mm",
        report.angular_mean_deg, report.cosine_error, report.point_to_point_mean_mm
    );
    Ok(report)
}

#[derive(Debug, Serialize)]
struct CorpusSummary {
    records: usize,
    angular_mean_deg: f64,
    cosine_error: f64,
    point_to_point_mean_mm: f64,
    per_record: Vec<EvaluationReport>,
}

/// `evaluate`: one record, or the whole corpus with `--all`.
pub fn cmd_evaluate(
    config: &PipelineConfig,
    record_id: Option<&str>,
    all: bool,
    subset_names: Option<&[String]>,
    self_check: bool,
) -> Result<(), CmdError> {
    if all {
        config.require_corpus()?;
        let manifest = read_manifest(&config.corpus).map_err(usage)?;
        let mut reports = Vec::new();
        for rec in &manifest.records {
            reports.push(evaluate_record(config, &rec.id, subset_names, self_check)?);
        }
        if reports.is_empty() {
            return Err(usage(anyhow!("corpus manifest lists no records")));
        }
        let n = reports.len() as f64;
        let summary = CorpusSummary {
            records: reports.len(),
            angular_mean_deg: reports.iter().map(|r| r.angular_mean_deg).sum::<f64>() / n,
            cosine_error: reports.iter().map(|r| r.cosine_error).sum::<f64>() / n,
            point_to_point_mean_mm: reports.iter().map(|r| r.point_to_point_mean_mm).sum::<f64>()
                / n,
            per_record: reports,
        };
        let path = config.corpus.join("summary.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&summary).map_err(internal)?)
            .map_err(internal)?;
        println!(
            "summary over {} records: angular mean {:.4} deg -> {}",
            summary.records,
            summary.angular_mean_deg,
            path.display()
        );
        return Ok(());
    }
    let record_id = record_id.ok_or_else(|| usage(anyhow!("--record <id> or --all required")))?;
    evaluate_record(config, record_id, subset_names, self_check)?;
    Ok(())
}

/// `render`: forward-render a mesh under a light configuration.
#[allow(clippy::too_many_arguments)]
pub fn cmd_render(
    mesh_path: &Path,
    lights_path: &Path,
    out_prefix: &str,
    size: usize,
    focal_factor: f64,
    translate_z: f64,
    per_face: bool,
    shadows: bool,
) -> Result<(), CmdError> {
    if !mesh_path.is_file() {
        return Err(usage(anyhow!("mesh not found: {}", mesh_path.display())));
    }
    if !lights_path.is_file() {
        return Err(usage(anyhow!("lights not found: {}", lights_path.display())));
    }
    let mesh = read_obj(mesh_path).map_err(usage)?;
    mesh.validate().map_err(usage)?;
    let lights_file: LightsFile = serde_json::from_slice(
        &std::fs::read(lights_path).map_err(usage)?,
    )
    .map_err(usage)?;
    let lights = lights_file.to_lights();
    if lights.is_empty() {
        return Err(usage(anyhow!("lights file lists no lights")));
    }
    let cam = nearps::geometry::CameraIntrinsics {
        fx: focal_factor * size as f64,
        fy: focal_factor * size as f64,
        cx: size as f64 / 2.0,
        cy: size as f64 / 2.0,
        width: size,
        height: size,
    };
    let pose = nearps::geometry::Pose {
        pitch: 0.0,
        yaw: 0.0,
        roll: 0.0,
        translation: Vec3::new(0.0, 0.0, translate_z),
    };
    let options = RenderOptions {
        shading: if per_face {
            Shading::PerFaceConstant
        } else {
            Shading::Smooth
        },
        cast_shadows: shadows,
    };
    for (i, light) in lights.iter().enumerate() {
        let out = render(&mesh, &pose, &cam, light, &options).map_err(internal)?;
        if out.status != nearps::render::RenderStatus::Ok {
            eprintln!("warning: mesh entirely behind camera for light {i}");
        }
        let image = out.image;
        write_pfm(
            Path::new(&format!("{out_prefix}_{i}.pfm")),
            &PfmImage::from_rgb(image.width, image.height, &image.pixels),
        )
        .map_err(internal)?;
        write_png_preview(Path::new(&format!("{out_prefix}_{i}.png")), &image)
            .map_err(internal)?;
        if i == 0 {
            let mask: Vec<f64> = image.mask.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect();
            write_pfm(
                Path::new(&format!("{out_prefix}_mask.pfm")),
                &PfmImage::from_gray(image.width, image.height, &mask),
            )
            .map_err(internal)?;
        }
    }
    println!("rendered {} lights -> {out_prefix}_*.pfm/png", lights.len());
    Ok(())
}
