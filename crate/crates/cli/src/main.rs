//! `tct`: simulate, mask, reconstruct and inspect spherical-aperture
//! thermoacoustic tomography data.
//!
//! ```text
//! tct simulate --phantom defrise --nphi 400 --ntheta 200 --nr 200 --out d.tcts
//! tct mask --input d.tcts --region east --out east.tcts
//! tct reconstruct --input d.tcts --method fbp --dim 256 --out d.tctv
//! tct profile --input d.tctv --axis z --at 0,0
//! tct slice --input d.tctv --axis y --at 0 --out y0.pgm
//! tct report --input d.tctv --phantom defrise
//! tct oracle --phantom defrise --transducer 0,0,1 --radius 1.2
//! ```

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use tct::forward::{monte_carlo_projection, project_ellipsoid};
use tct::io;
use tct::metrics::{extract_profile, report, Axis};
use tct::sinogram::{apply_mask, make_mask};
use tct::vec3::norm;
use tct::{simulate, ForwardConfig, MaskRegion, Method, Phantom, RadialGrid, ReconConfig, TransducerGrid};

#[derive(Parser)]
#[command(name = "tct", version, about = "Thermoacoustic tomography with a spherical aperture")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the spherical Radon transform of a phantom.
    Simulate(SimulateArgs),
    /// Zero-fill the sinogram rows outside a scan region.
    Mask(MaskArgs),
    /// Reconstruct a volume from a sinogram.
    Reconstruct(ReconstructArgs),
    /// Write a line profile of a volume as CSV.
    Profile(ProfileArgs),
    /// Write a planar slice of a volume as an 8-bit PGM image.
    Slice(SliceArgs),
    /// Compare a volume against a reference and print metrics as JSON.
    Report(ReportArgs),
    /// Spot-check one projection against a Monte Carlo estimate.
    Oracle(OracleArgs),
}

fn grid_size(s: &str) -> Result<usize, String> {
    bounded(s, 4, 4096)
}

fn volume_dim(s: &str) -> Result<usize, String> {
    bounded(s, 8, 1024)
}

fn bounded(s: &str, lo: usize, hi: usize) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("'{s}' is not a whole number"))?;
    if n < lo || n > hi {
        return Err(format!("{n} is outside [{lo}, {hi}]"));
    }
    Ok(n)
}

fn pair(s: &str) -> Result<[f64; 2], String> {
    let v = numbers(s)?;
    v.try_into()
        .map_err(|_| format!("expected two comma-separated numbers, got '{s}'"))
}

fn triple(s: &str) -> Result<[f64; 3], String> {
    let v = numbers(s)?;
    v.try_into()
        .map_err(|_| format!("expected three comma-separated numbers, got '{s}'"))
}

fn numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect()
}

#[derive(Args)]
struct SimulateArgs {
    /// `defrise`, `ball:cx,cy,cz,radius`, `ellipsoid:cx,cy,cz,ex,ey,ez[,amp]` or a JSON file.
    #[arg(long)]
    phantom: String,
    #[arg(long, default_value = "400", value_parser = grid_size)]
    nphi: usize,
    #[arg(long, default_value = "200", value_parser = grid_size)]
    ntheta: usize,
    #[arg(long, default_value = "200", value_parser = grid_size)]
    nr: usize,
    /// Largest sampled sphere radius.
    #[arg(long, default_value_t = 2.0)]
    rmax: f64,
    /// Gauss-Legendre order per azimuthal piece.
    #[arg(long, default_value_t = 32)]
    gauss_order: usize,
    /// Azimuthal samples for the smooth-case trapezoid rule.
    #[arg(long, default_value_t = 256)]
    smooth_samples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    input: PathBuf,
    /// full, east, west, south or north.
    #[arg(long)]
    region: MaskRegion,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    input: PathBuf,
    /// fbp, rho or approx.
    #[arg(long, default_value = "fbp")]
    method: Method,
    #[arg(long, default_value = "256", value_parser = volume_dim)]
    dim: usize,
    /// Voxels farther than this from the origin are left at zero.
    #[arg(long, default_value_t = 1.0)]
    roi: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    axis: Axis,
    /// Coordinates on the two remaining axes, in x, y, z order.
    #[arg(long, value_parser = pair, allow_hyphen_values = true)]
    at: [f64; 2],
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SliceArgs {
    #[arg(long)]
    input: PathBuf,
    /// Normal axis of the slice plane.
    #[arg(long)]
    axis: Axis,
    #[arg(long, allow_hyphen_values = true)]
    at: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    /// Reference volume file.
    #[arg(long, conflicts_with = "phantom", required_unless_present = "phantom")]
    reference: Option<PathBuf>,
    /// Reference phantom, voxelized at the input resolution.
    #[arg(long)]
    phantom: Option<String>,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    phantom: String,
    /// Transducer position on the unit sphere.
    #[arg(long, value_parser = triple, allow_hyphen_values = true)]
    transducer: [f64; 3],
    #[arg(long)]
    radius: f64,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => io::write_bytes(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let phantom = io::load_phantom(&a.phantom).with_context(|| format!("loading phantom '{}'", a.phantom))?;
    let grid = TransducerGrid::new(a.nphi, a.ntheta)?;
    let radial = RadialGrid::new(a.nr, a.rmax)?;
    let cfg = ForwardConfig::new(a.smooth_samples, a.gauss_order)?;
    info!(
        "simulating {} ellipsoid(s) on {}x{} transducers, {} radii up to {}",
        phantom.len(),
        a.nphi,
        a.ntheta,
        a.nr,
        a.rmax
    );
    let s = simulate(&phantom, &grid, &radial, &cfg)?;
    io::write_sinogram(&a.out, &s)?;
    info!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_mask(a: MaskArgs) -> Result<()> {
    let s = io::read_sinogram(&a.input)?;
    let m = make_mask(&s.grid, a.region)?;
    let masked = apply_mask(&s, &m)?;
    info!("{} of {} transducers active", m.count_active(), s.grid.len());
    io::write_sinogram(&a.out, &masked)?;
    Ok(())
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<()> {
    let s = io::read_sinogram(&a.input)?;
    let cfg = ReconConfig::with_roi(a.dim, a.method, a.roi)?;
    info!("reconstructing {}^3 voxels with {}", a.dim, a.method);
    let v = tct::recon::reconstruct(&s, &cfg)?;
    io::write_volume(&a.out, &v)?;
    info!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_profile(a: ProfileArgs) -> Result<()> {
    let v = io::read_volume(&a.input)?;
    let p = extract_profile(&v, a.axis, a.at)?;
    write_text(a.out.as_deref(), &io::profile_csv(&p))
}

fn cmd_slice(a: SliceArgs) -> Result<()> {
    let v = io::read_volume(&a.input)?;
    let (pgm, lo, hi) = io::slice_pgm(&v, a.axis, a.at)?;
    info!("slice {}={} window [{lo}, {hi}]", a.axis, a.at);
    io::write_bytes(&a.out, &pgm)?;
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let v = io::read_volume(&a.input)?;
    let reference = match (&a.reference, &a.phantom) {
        (Some(path), _) => io::read_volume(path)?,
        (None, Some(spec)) => {
            let ph: Phantom = io::load_phantom(spec).with_context(|| format!("loading phantom '{spec}'"))?;
            ph.voxelize(v.dim)?
        }
        (None, None) => bail!("report needs --reference or --phantom"),
    };
    let r = report(&v, &reference)?;
    write_text(a.out.as_deref(), &(io::report_json(&r) + "\n"))
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let phantom = io::load_phantom(&a.phantom).with_context(|| format!("loading phantom '{}'", a.phantom))?;
    let p = a.transducer;
    if (norm(p) - 1.0).abs() > 1e-9 {
        bail!("transducer {p:?} is not on the unit sphere");
    }
    let cfg = ForwardConfig::default();
    let mut exact = 0.0;
    for e in phantom.ellipsoids() {
        exact += e.amplitude * project_ellipsoid(e, p, a.radius, &cfg)?;
    }
    let (mc, se) = monte_carlo_projection(&phantom, p, a.radius, a.samples, a.seed)?;
    let z = if se > 0.0 { (exact - mc) / se } else { 0.0 };
    println!(
        "quadrature {} monte_carlo {} standard_error {} z {}",
        io::format_sig9(exact),
        io::format_sig9(mc),
        io::format_sig9(se),
        io::format_sig9(z)
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Mask(a) => cmd_mask(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Slice(a) => cmd_slice(a),
        Command::Report(a) => cmd_report(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("tct: {}", line.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Library errors already embed their source in the message.
            let mut chain: Vec<String> = Vec::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !chain.last().is_some_and(|prev| prev.ends_with(&cause)) {
                    chain.push(cause);
                }
            }
            eprintln!("tct: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}
