//! Command-line surface: batch commands tying the pipeline together.
//!
//! Exit codes are a stable contract: 0 success, 1 runtime or data error,
//! 2 usage error.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::acquisition::{
    compressive_acquire, rastered_image, AcquisitionConfig, AcquisitionMode, ConjugateMaskPolicy,
    MeasurementVector, Orientation,
};
use crate::config::{RunConfig, CONFIG_ENV_VAR};
use crate::error::{Error, Result};
use crate::experiments::{
    cross_angle_sweep, default_line_positions, default_line_width_px, gaussian_seed, line_raster,
    noise_model, sweep_mask, SweepStage,
};
use crate::image::phantoms;
use crate::noise::{predicted_squeezing_single_mode, NoiseFigure, NrfVariant};
use crate::pgm::{read_mask, read_pgm_with_pitch, write_pgm_normalized, PgmFormat};
use crate::reconstruct::{
    psnr, reconstruct_ls, reconstruct_tv, ReconstructionProblem, ReconstructionResult,
};
use crate::sampling::{scrambled_block_hadamard, select_rows, SensingMatrix};
use crate::source::{build_twin_pair, TwinBeamPair};
use crate::spectrum::{simulate_spectrum, SpectrumConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser)]
#[command(
    name = "twinbeam",
    version,
    about = "Twin-beam quantum imaging workbench: masked squeezing, rastered and compressive single-pixel acquisition, TV reconstruction"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Config file (key = value lines); TWINBEAM_CONFIG names a default
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override both the acquisition and sampling seeds
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Acquisition mode: classical | quantum
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Noise variant: standard | paper-corrected
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Squeezing for each mask file (and optionally a rotating-cross sweep)
    MaskSweep {
        /// PGM mask files; nonzero pixels are on
        masks: Vec<PathBuf>,
        /// Also sweep cross masks over an angle range, e.g. 0..90
        #[arg(long)]
        cross_angles: Option<String>,
        /// Angle step in degrees for --cross-angles
        #[arg(long, default_value_t = 5.0)]
        angle_step: f64,
        /// Mask placement: seed | probe
        #[arg(long, default_value = "seed")]
        stage: String,
    },
    /// Raster a line or pixel block across the twin beams
    Raster {
        /// Shape: line | pixel
        #[arg(long, default_value = "line")]
        shape: String,
        /// Line width in pixels (default: half the beam radius)
        #[arg(long)]
        width: Option<usize>,
        /// Raster cell size in pixels for pixel rasters (default: grid cell)
        #[arg(long)]
        pixel_size: Option<usize>,
        /// Line orientation: vertical | horizontal
        #[arg(long, default_value = "vertical")]
        orientation: String,
        /// Comma-separated leading-edge positions (default: 7 line steps)
        #[arg(long)]
        positions: Option<String>,
        /// Conjugate mask policy: fixed-centered | mirrored
        #[arg(long, default_value = "fixed-centered")]
        policy: String,
    },
    /// Generate the configured scrambled block Hadamard sensing matrix
    Matrix {
        /// Output file (default: <out-dir>/matrix.sbh)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compressive acquisition of a PGM beam profile
    Acquire {
        image: PathBuf,
        /// Sensing matrix file; generated from the config when omitted
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Output measurement file (default: <out-dir>/meas.txt)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct an image from a measurement file
    Reconstruct {
        measurements: PathBuf,
        /// Sensing matrix file (required)
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Solver: tv | ls
        #[arg(long, default_value = "tv")]
        solver: String,
        /// Reference image for the PSNR metric
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Image width (default: square root of the matrix columns)
        #[arg(long)]
        width: Option<usize>,
        /// Image height (default: square root of the matrix columns)
        #[arg(long)]
        height: Option<usize>,
    },
    /// Synthesize a spectrum-analyzer trace
    Spectrum {
        /// Noise figure in dB relative to the shot-noise limit
        #[arg(long, allow_hyphen_values = true)]
        nrf_db: Option<f64>,
        /// Derive the noise figure from a transmission instead
        #[arg(long)]
        eta: Option<f64>,
        /// Emit the 0 dB shot-noise reference trace
        #[arg(long)]
        snl: bool,
        /// Disable measurement jitter
        #[arg(long)]
        no_jitter: bool,
    },
    /// End-to-end run: phantom, acquisition, TV and LS reconstruction
    Pipeline {
        /// Phantom: e | face
        #[arg(long, default_value = "e")]
        phantom: String,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with code 0, usage errors
            // with code 2
            let _ = e.print();
            return if e.exit_code() == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let cfg = match load_config(&cli.global) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("twinbeam: {e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = fs::create_dir_all(&cli.global.out_dir) {
        eprintln!("twinbeam: cannot create {}: {e}", cli.global.out_dir.display());
        return EXIT_ERROR;
    }
    match dispatch(&cli, &cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("twinbeam: {e}");
            EXIT_ERROR
        }
    }
}

fn load_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => match std::env::var_os(CONFIG_ENV_VAR) {
            Some(path) => RunConfig::load(PathBuf::from(path))?,
            None => RunConfig::default(),
        },
    };
    if let Some(seed) = global.seed {
        cfg.acquisition.rng_seed = seed;
        cfg.sampling.seed = seed;
    }
    if let Some(mode) = &global.mode {
        cfg.acquisition.mode = AcquisitionMode::parse(mode)?;
    }
    if let Some(variant) = &global.variant {
        cfg.variant = NrfVariant::parse(variant)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<i32> {
    let out_dir = &cli.global.out_dir;
    match &cli.command {
        Command::MaskSweep {
            masks,
            cross_angles,
            angle_step,
            stage,
        } => cmd_mask_sweep(cfg, out_dir, masks, cross_angles.as_deref(), *angle_step, stage),
        Command::Raster {
            shape,
            width,
            pixel_size,
            orientation,
            positions,
            policy,
        } => cmd_raster(
            cfg,
            out_dir,
            shape,
            *width,
            *pixel_size,
            orientation,
            positions.as_deref(),
            policy,
        ),
        Command::Matrix { out } => cmd_matrix(cfg, out_dir, out.as_deref()),
        Command::Acquire { image, matrix, out } => {
            cmd_acquire(cfg, out_dir, image, matrix.as_deref(), out.as_deref())
        }
        Command::Reconstruct {
            measurements,
            matrix,
            solver,
            truth,
            width,
            height,
        } => cmd_reconstruct(
            cfg,
            out_dir,
            measurements,
            matrix.as_deref(),
            solver,
            truth.as_deref(),
            *width,
            *height,
        ),
        Command::Spectrum {
            nrf_db,
            eta,
            snl,
            no_jitter,
        } => cmd_spectrum(cfg, out_dir, *nrf_db, *eta, *snl, *no_jitter),
        Command::Pipeline { phantom } => cmd_pipeline(cfg, out_dir, phantom),
    }
}

/// Fixed 9-decimal format shared by all CSV output.
fn fmt9(x: f64) -> String {
    format!("{:.9}", x)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_mask_sweep(
    cfg: &RunConfig,
    out_dir: &Path,
    masks: &[PathBuf],
    cross_angles: Option<&str>,
    angle_step: f64,
    stage: &str,
) -> Result<i32> {
    if masks.is_empty() && cross_angles.is_none() {
        eprintln!("twinbeam: mask-sweep needs mask files or --cross-angles");
        return Ok(EXIT_USAGE);
    }
    let stage = SweepStage::parse(stage)?;
    let mut csv = String::from("mask,eta,predicted_db,model_db\n");
    let mut failures = 0usize;
    for path in masks {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let row = read_mask(path).and_then(|mask| sweep_mask(cfg, &mask, stage));
        match row {
            Ok(row) => {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    name,
                    fmt9(row.eta),
                    fmt9(row.predicted_db),
                    fmt9(row.model_db)
                ));
            }
            Err(e) => {
                eprintln!("twinbeam: {}: {e}", path.display());
                failures += 1;
            }
        }
    }
    if !masks.is_empty() {
        let out = out_dir.join("sweep.csv");
        write_file(&out, &csv)?;
        println!("wrote {}", out.display());
    }
    if let Some(range) = cross_angles {
        if !(angle_step > 0.0) {
            eprintln!("twinbeam: --angle-step must be positive");
            return Ok(EXIT_USAGE);
        }
        let (lo, hi) = parse_angle_range(range)?;
        let mut angles = Vec::new();
        let mut a = lo;
        while a <= hi + 1e-9 {
            angles.push(a);
            a += angle_step;
        }
        let rows = cross_angle_sweep(cfg, &angles)?;
        let mut cross_csv = String::from("angle_deg,eta,predicted_db,model_db\n");
        for (angle, row) in rows {
            cross_csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt9(angle),
                fmt9(row.eta),
                fmt9(row.predicted_db),
                fmt9(row.model_db)
            ));
        }
        let out = out_dir.join("cross.csv");
        write_file(&out, &cross_csv)?;
        println!("wrote {}", out.display());
    }
    if !masks.is_empty() && failures == masks.len() {
        return Ok(EXIT_ERROR);
    }
    Ok(EXIT_OK)
}

fn parse_angle_range(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| Error::invalid(format!("bad angle range '{s}', expected LO..HI")))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad angle '{lo}'")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad angle '{hi}'")))?;
    if hi < lo {
        return Err(Error::invalid("angle range is empty"));
    }
    Ok((lo, hi))
}

#[allow(clippy::too_many_arguments)]
fn cmd_raster(
    cfg: &RunConfig,
    out_dir: &Path,
    shape: &str,
    width: Option<usize>,
    pixel_size: Option<usize>,
    orientation: &str,
    positions: Option<&str>,
    policy: &str,
) -> Result<i32> {
    let policy = match policy {
        "fixed-centered" => ConjugateMaskPolicy::FixedCentered,
        "mirrored" => ConjugateMaskPolicy::Mirrored,
        other => {
            eprintln!("twinbeam: unknown policy '{other}'");
            return Ok(EXIT_USAGE);
        }
    };
    let orientation = match orientation {
        "vertical" => Orientation::Vertical,
        "horizontal" => Orientation::Horizontal,
        other => {
            eprintln!("twinbeam: unknown orientation '{other}'");
            return Ok(EXIT_USAGE);
        }
    };
    match shape {
        "line" => {
            let width_px = width.unwrap_or_else(|| default_line_width_px(cfg));
            let positions = match positions {
                Some(list) => {
                    let parsed = parse_positions(list, orientation)?;
                    if parsed.is_empty() {
                        eprintln!("twinbeam: no raster positions");
                        return Ok(EXIT_USAGE);
                    }
                    parsed
                }
                None => default_line_positions(cfg, width_px, orientation),
            };
            let (_, result) = line_raster(cfg, width_px, orientation, &positions, policy)?;
            let mut csv = String::from("position,nrf_db\n");
            for (pos, fig) in result.positions.iter().zip(&result.figures) {
                let coord = match orientation {
                    Orientation::Vertical => pos.0,
                    Orientation::Horizontal => pos.1,
                };
                csv.push_str(&format!("{},{}\n", coord, fmt9(fig.value_db())));
            }
            let out = out_dir.join("raster.csv");
            write_file(&out, &csv)?;
            println!("wrote {}", out.display());
            Ok(EXIT_OK)
        }
        "pixel" => {
            let beam = gaussian_seed(cfg)?;
            let pair = build_twin_pair(&beam, &cfg.source, cfg.cells_per_diameter)?;
            let size = pixel_size.unwrap_or_else(|| pair.grid.cell_edge_px());
            let image = rastered_image(&pair.probe, size, &AcquisitionConfig::noiseless())?;
            let model = noise_model(cfg, true)?;
            let mut csv = String::from("position,nrf_db\n");
            let shape = crate::acquisition::RasterShape::Pixel { size_px: size };
            let mut block_positions = Vec::new();
            for by in 0..image.height() {
                for bx in 0..image.width() {
                    block_positions.push(((bx * size) as i64, (by * size) as i64));
                }
            }
            let scan = crate::acquisition::raster_scan(&pair, &model, shape, &block_positions, policy);
            match scan {
                Ok(scan) => {
                    for (i, fig) in scan.figures.iter().enumerate() {
                        csv.push_str(&format!("{},{}\n", i, fmt9(fig.value_db())));
                    }
                }
                Err(Error::NoLight) => {
                    // tiles beyond the beam tail carry no flux; report the
                    // image without per-tile figures
                    csv.push_str("# per-tile noise figures unavailable: empty tiles\n");
                }
                Err(e) => return Err(e),
            }
            let csv_path = out_dir.join("raster.csv");
            write_file(&csv_path, &csv)?;
            let pgm_path = out_dir.join("raster.pgm");
            write_pgm_normalized(&image, PgmFormat::Binary { maxval: 65535 }, &pgm_path)?;
            println!("wrote {} and {}", csv_path.display(), pgm_path.display());
            Ok(EXIT_OK)
        }
        other => {
            eprintln!("twinbeam: unknown shape '{other}'");
            Ok(EXIT_USAGE)
        }
    }
}

fn parse_positions(list: &str, orientation: Orientation) -> Result<Vec<(i64, i64)>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let v: i64 = s
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad position '{s}'")))?;
            Ok(match orientation {
                Orientation::Vertical => (v, 0),
                Orientation::Horizontal => (0, v),
            })
        })
        .collect()
}

fn build_matrix(cfg: &RunConfig) -> Result<SensingMatrix> {
    let w = scrambled_block_hadamard(
        cfg.sampling.n,
        cfg.sampling.block_size,
        cfg.sampling.seed,
        cfg.sampling.window,
    )?;
    select_rows(&w, cfg.sampling.m, cfg.sampling.seed)
}

fn cmd_matrix(cfg: &RunConfig, out_dir: &Path, out: Option<&Path>) -> Result<i32> {
    let a = build_matrix(cfg)?;
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir.join("matrix.sbh"));
    let mut buf = Vec::new();
    a.write_text(&mut buf).map_err(|e| Error::io(&path, e))?;
    fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
    println!(
        "SBH {} {} {} {} {}",
        a.n(),
        a.block_size(),
        a.m(),
        a.scramble_seed(),
        a.window()
    );
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn read_matrix(path: &Path) -> Result<SensingMatrix> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    SensingMatrix::read_text(BufReader::new(file))
}

fn cmd_acquire(
    cfg: &RunConfig,
    out_dir: &Path,
    image_path: &Path,
    matrix_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<i32> {
    let (image, _) = read_pgm_with_pitch(image_path, cfg.pitch_um)?;
    let a = match matrix_path {
        Some(p) => read_matrix(p)?,
        None => {
            let a = build_matrix(cfg)?;
            let path = out_dir.join("matrix.sbh");
            let mut buf = Vec::new();
            a.write_text(&mut buf).map_err(|e| Error::io(&path, e))?;
            fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
            a
        }
    };
    if a.n() != image.pixel_count() {
        eprintln!(
            "twinbeam: matrix covers {} pixels but the image has {}",
            a.n(),
            image.pixel_count()
        );
        return Ok(EXIT_ERROR);
    }
    let pair = TwinBeamPair::from_probe(image, &cfg.source, cfg.cells_per_diameter)?;
    let model = noise_model(cfg, true)?;
    let meas = compressive_acquire(&pair, &a, &model, &cfg.acquisition)?;
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir.join("meas.txt"));
    let mut buf = Vec::new();
    meas.write_text(&mut buf).map_err(|e| Error::io(&path, e))?;
    fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
    if let Some(mref) = &meas.matrix_ref {
        println!("{}", mref.header_line());
    }
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn side_lengths(
    n: usize,
    width: Option<usize>,
    height: Option<usize>,
) -> Result<(usize, usize)> {
    match (width, height) {
        (Some(w), Some(h)) => Ok((w, h)),
        (None, None) => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(Error::invalid(format!(
                    "matrix covers {n} pixels, not a square; pass --width and --height"
                )));
            }
            Ok((side, side))
        }
        _ => Err(Error::invalid("pass both --width and --height or neither")),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_reconstruct(
    cfg: &RunConfig,
    out_dir: &Path,
    meas_path: &Path,
    matrix_path: Option<&Path>,
    solver: &str,
    truth: Option<&Path>,
    width: Option<usize>,
    height: Option<usize>,
) -> Result<i32> {
    let Some(matrix_path) = matrix_path else {
        eprintln!("twinbeam: reconstruction needs --matrix");
        return Ok(EXIT_ERROR);
    };
    let a = read_matrix(matrix_path)?;
    let file = fs::File::open(meas_path).map_err(|e| Error::io(meas_path, e))?;
    let meas = MeasurementVector::read_text(BufReader::new(file))?;
    if meas.len() != a.m() {
        eprintln!(
            "twinbeam: matrix has {} rows but the file carries {} measurements",
            a.m(),
            meas.len()
        );
        return Ok(EXIT_ERROR);
    }
    let (w, h) = side_lengths(a.n(), width, height)?;
    let mut problem = ReconstructionProblem::from_measurements(&a, &meas, w, h)?;
    problem.pitch_um = cfg.pitch_um;
    problem.tolerance = cfg.solver.tolerance;
    problem.max_iterations = cfg.solver.max_iterations;
    if let Some(eps) = cfg.solver.epsilon {
        problem.epsilon = eps;
    }
    let result = match solver {
        "tv" => reconstruct_tv(&problem)?,
        "ls" => reconstruct_ls(&problem)?,
        other => {
            eprintln!("twinbeam: unknown solver '{other}'");
            return Ok(EXIT_USAGE);
        }
    };
    let psnr_value = match truth {
        Some(path) => {
            let (t, _) = read_pgm_with_pitch(path, cfg.pitch_um)?;
            Some(psnr(&result.estimate, t.as_slice())?)
        }
        None => None,
    };
    write_recon_outputs(out_dir, "recon", &result, psnr_value)?;
    println!(
        "{} {} iterations, residual {:.3e}, converged: {}",
        solver, result.iterations, result.residual_norm, result.converged
    );
    Ok(if result.converged { EXIT_OK } else { EXIT_ERROR })
}

fn write_recon_outputs(
    out_dir: &Path,
    stem: &str,
    result: &ReconstructionResult,
    psnr_value: Option<f64>,
) -> Result<()> {
    let pgm_path = out_dir.join(format!("{stem}.pgm"));
    write_pgm_normalized(&result.image(), PgmFormat::Binary { maxval: 65535 }, &pgm_path)?;
    let metrics_path = out_dir.join(format!("{stem}_metrics.txt"));
    let psnr_field = psnr_value
        .map(|v| format!("{:.9e}", v))
        .unwrap_or_else(|| "nan".to_string());
    write_file(
        &metrics_path,
        &format!(
            "TVREC {:.9e} {:.9e} {} {} {}\n",
            result.tv_value,
            result.residual_norm,
            result.iterations,
            result.converged,
            psnr_field
        ),
    )?;
    println!("wrote {} and {}", pgm_path.display(), metrics_path.display());
    Ok(())
}

fn cmd_spectrum(
    cfg: &RunConfig,
    out_dir: &Path,
    nrf_db: Option<f64>,
    eta: Option<f64>,
    snl: bool,
    no_jitter: bool,
) -> Result<i32> {
    let db = if snl {
        0.0
    } else if let Some(db) = nrf_db {
        db
    } else if let Some(eta) = eta {
        predicted_squeezing_single_mode(eta, cfg.source.gain, cfg.variant)?
    } else {
        -cfg.source.max_squeezing_db
    };
    let nf = if db == 0.0 {
        NoiseFigure::from_linear(1.0, 1.0)?
    } else {
        NoiseFigure::from_db(db, 1.0)?
    };
    let mut spec_cfg = SpectrumConfig {
        rng_seed: cfg.acquisition.rng_seed,
        ..SpectrumConfig::default()
    };
    if no_jitter {
        spec_cfg.jitter_sigma_db = 0.0;
    }
    let spec = simulate_spectrum(&nf, &spec_cfg)?;
    let mut csv = String::from("frequency_hz,noise_db\n");
    for p in &spec.points {
        csv.push_str(&format!("{},{}\n", fmt9(p.frequency_hz), fmt9(p.noise_db)));
    }
    let out = out_dir.join("spectrum.csv");
    write_file(&out, &csv)?;
    println!("wrote {} (mean {} dB)", out.display(), fmt9(spec.mean_db()));
    Ok(EXIT_OK)
}

fn cmd_pipeline(cfg: &RunConfig, out_dir: &Path, phantom: &str) -> Result<i32> {
    let n = cfg.sampling.n;
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::invalid(format!(
            "sampling.n = {n} is not a square image"
        )));
    }
    let mask = match phantom {
        "e" => phantoms::letter_e_mask(side, side),
        "face" => phantoms::happy_face_mask(side, side, side as f64 * 0.8),
        other => {
            eprintln!("twinbeam: unknown phantom '{other}'");
            return Ok(EXIT_USAGE);
        }
    };
    let beam = phantoms::gaussian_beam(side, side, cfg.pitch_um, side as f64 * 0.3)?;
    let seed = mask.apply(&beam)?;
    let pair = build_twin_pair(&seed, &cfg.source, cfg.cells_per_diameter)?;
    let truth = pair.probe.clone();
    write_pgm_normalized(
        &truth,
        PgmFormat::Binary { maxval: 65535 },
        out_dir.join("phantom.pgm"),
    )?;

    let a = build_matrix(cfg)?;
    let matrix_path = out_dir.join("matrix.sbh");
    let mut buf = Vec::new();
    a.write_text(&mut buf).map_err(|e| Error::io(&matrix_path, e))?;
    fs::write(&matrix_path, &buf).map_err(|e| Error::io(&matrix_path, e))?;

    let model = noise_model(cfg, true)?;
    let meas = compressive_acquire(&pair, &a, &model, &cfg.acquisition)?;
    let meas_path = out_dir.join("meas.txt");
    let mut buf = Vec::new();
    meas.write_text(&mut buf).map_err(|e| Error::io(&meas_path, e))?;
    fs::write(&meas_path, &buf).map_err(|e| Error::io(&meas_path, e))?;

    let mut problem = ReconstructionProblem::from_measurements(&a, &meas, side, side)?;
    problem.pitch_um = cfg.pitch_um;
    problem.tolerance = cfg.solver.tolerance;
    problem.max_iterations = cfg.solver.max_iterations;
    if let Some(eps) = cfg.solver.epsilon {
        problem.epsilon = eps;
    }
    let tv = reconstruct_tv(&problem)?;
    let ls = reconstruct_ls(&problem)?;
    let tv_psnr = psnr(&tv.estimate, truth.as_slice())?;
    let ls_psnr = psnr(&ls.estimate, truth.as_slice())?;
    write_recon_outputs(out_dir, "recon_tv", &tv, Some(tv_psnr))?;
    write_recon_outputs(out_dir, "recon_ls", &ls, Some(ls_psnr))?;
    println!(
        "tv_psnr_db={} ls_psnr_db={} tv_converged={}",
        fmt9(tv_psnr),
        fmt9(ls_psnr),
        tv.converged
    );
    Ok(if tv.converged { EXIT_OK } else { EXIT_ERROR })
}
