use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use azimuth_core::aeconv::{aeconv_forward_naive, aeconv_forward_planned, GatherPlan};
use azimuth_core::anchor::{decode, encode, AzimuthAnchor};
use azimuth_core::bench::{run_bench, write_bench_csv};
use azimuth_core::check::{run_all, write_report_csv};
use azimuth_core::depth::DepthMapping;
use azimuth_core::geometry::{GridSpec, RadialBasisField};
use azimuth_core::io::tables;
use azimuth_core::io::tensor_file::{read_tensor, write_tensor, write_tensor_file, Tensor};
use azimuth_core::io::RunConfig;
use azimuth_core::revolve::{run_revolve_with_plan, write_reports_csv, SyntheticScene};
use azimuth_core::tensor::{standard_conv, FeatureMap};
use azimuth_core::{Error, Result, Vec2};

#[derive(Parser)]
#[command(name = "azimuth", version, about = "Azimuth-equivariant BEV kernels")]
struct Cli {
    /// Flat key=value configuration file; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Operator {
    Aeconv,
    Standard,
}

#[derive(Subcommand)]
enum Command {
    /// Write the per-cell azimuth (H x W) and radial unit (2 x H x W) tensors.
    Field {
        /// Use a zero-azimuth field (ego axes everywhere).
        #[arg(long)]
        zero: bool,
    },
    /// Render a random input map with the configured grid and input channels.
    Synth {
        #[arg(long)]
        output: PathBuf,
    },
    /// Convolve an AEBF feature map.
    Conv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "aeconv")]
        operator: Operator,
        #[arg(long)]
        output: PathBuf,
        /// Zero-azimuth field: reduces the azimuth convolution to the ordinary one.
        #[arg(long)]
        zero_field: bool,
        /// Evaluate directly instead of through a gather plan.
        #[arg(long)]
        naive: bool,
    },
    /// Boxes CSV -> residuals CSV plus the anchors used.
    Encode {
        #[arg(long)]
        boxes: PathBuf,
        #[arg(long)]
        residuals: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        /// Use Cartesian zero-size anchors instead of azimuth anchors.
        #[arg(long)]
        cartesian: bool,
    },
    /// Residuals CSV + anchors CSV -> boxes CSV.
    Decode {
        #[arg(long)]
        residuals: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        boxes: PathBuf,
        #[arg(long)]
        cartesian: bool,
    },
    /// Remap virtual-depth scores (s0..s{M-1}) to the fixed layout (f0..f{N-1}).
    MapDepth {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        fx: f64,
        #[arg(long)]
        fy: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the property suite; exits non-zero if any check fails.
    Check {
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rotate-the-rig equivariance report.
    Revolve {
        /// Angles in degrees.
        #[arg(long, value_delimiter = ',', default_value = "30,60,90,120")]
        angles: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        scenes: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time naive vs planned azimuth convolution vs the ordinary one.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        sizes: Vec<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn field_for(cfg: &RunConfig, grid: &GridSpec, zero: bool) -> Result<RadialBasisField> {
    Ok(if zero {
        RadialBasisField::uniform(grid.height, grid.width, 0.0)
    } else {
        RadialBasisField::radial(grid, cfg.azimuth_center()?)
    })
}

/// Anchor at the grid cell nearest `point`, framed by the azimuth field.
fn anchor_for(
    grid: &GridSpec,
    field: &RadialBasisField,
    point: Vec2,
    z: f64,
    cartesian: bool,
    row: usize,
) -> Result<AzimuthAnchor> {
    let (i, j) = grid.nearest_cell(point).ok_or_else(|| {
        Error::Config(format!(
            "row {row}: point ({}, {}) is outside the BEV grid",
            point.x, point.y
        ))
    })?;
    let loc = grid.cell_center(i, j);
    Ok(if cartesian {
        AzimuthAnchor::cartesian(loc, z)
    } else {
        AzimuthAnchor::from_field(field, i, j, loc, z)
    })
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Field { zero } => {
            let grid = cfg.grid()?;
            let field = field_for(&cfg, &grid, zero)?;
            let (h, w) = (grid.height, grid.width);
            let alpha = Tensor::new(vec![h, w], field.alpha().to_vec())?;
            let mut radial = Vec::with_capacity(2 * h * w);
            radial.extend(field.radial_units().iter().map(|e| e.x));
            radial.extend(field.radial_units().iter().map(|e| e.y));
            let radial = Tensor::new(vec![2, h, w], radial)?;
            let dir = &cfg.output_dir;
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            write_tensor_file(&alpha, dir.join("alpha.aebf"))?;
            write_tensor_file(&radial, dir.join("e_r.aebf"))?;
            println!(
                "wrote {} and {}",
                dir.join("alpha.aebf").display(),
                dir.join("e_r.aebf").display()
            );
        }
        Command::Synth { output } => {
            use rand::SeedableRng;
            let grid = cfg.grid()?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let map = FeatureMap::random(cfg.in_channels, grid.height, grid.width, &mut rng);
            write_tensor(&map, &output)?;
        }
        Command::Conv {
            input,
            operator,
            output,
            zero_field,
            naive,
        } => {
            let map = read_tensor(&input)?;
            let grid = cfg.grid()?;
            if (map.height(), map.width()) != (grid.height, grid.width) {
                return Err(Error::Config(format!(
                    "input is {}x{} but the configured grid is {}x{}",
                    map.height(),
                    map.width(),
                    grid.height,
                    grid.width
                )));
            }
            let kernel = cfg.kernel()?;
            let out = match operator {
                Operator::Standard => standard_conv(&map, &kernel)?,
                Operator::Aeconv => {
                    let field = field_for(&cfg, &grid, zero_field)?;
                    if naive {
                        aeconv_forward_naive(&map, &kernel, &field)?
                    } else {
                        let plan = GatherPlan::build(&field, kernel.extent())?;
                        aeconv_forward_planned(&map, &kernel, &plan)?
                    }
                }
            };
            write_tensor(&out, &output)?;
        }
        Command::Encode {
            boxes,
            residuals,
            anchors,
            cartesian,
        } => {
            let grid = cfg.grid()?;
            let field = field_for(&cfg, &grid, false)?;
            let input = tables::read_boxes(open(&boxes)?, &boxes.display().to_string())?;
            let mut res = Vec::with_capacity(input.len());
            let mut points = Vec::with_capacity(input.len());
            for (row, b) in input.iter().enumerate() {
                let a = anchor_for(&grid, &field, b.center, 0.0, cartesian, row + 2)?;
                res.push(encode(b, &a));
                points.push((a.location, a.z));
            }
            tables::write_residuals(create(&residuals)?, &res)?;
            tables::write_anchor_points(create(&anchors)?, &points)?;
        }
        Command::Decode {
            residuals,
            anchors,
            boxes,
            cartesian,
        } => {
            let grid = cfg.grid()?;
            let field = field_for(&cfg, &grid, false)?;
            let res = tables::read_residuals(open(&residuals)?, &residuals.display().to_string())?;
            let pts = tables::read_anchor_points(open(&anchors)?, &anchors.display().to_string())?;
            if res.len() != pts.len() {
                return Err(Error::Config(format!(
                    "{} residual rows but {} anchor rows",
                    res.len(),
                    pts.len()
                )));
            }
            let mut out = Vec::with_capacity(res.len());
            for (row, (r, &(p, z))) in res.iter().zip(&pts).enumerate() {
                let a = anchor_for(&grid, &field, p, z, cartesian, row + 2)?;
                out.push(decode(r, &a));
            }
            tables::write_boxes(create(&boxes)?, &out)?;
        }
        Command::MapDepth { scores, fx, fy, output } => {
            let vspec = cfg.virtual_depth()?;
            let mapping = DepthMapping::new(vspec, cfg.fixed_depth()?, fx, fy)?;
            let rows = tables::read_scores(open(&scores)?, vspec.bins, &scores.display().to_string())?;
            let mapped = rows.iter().map(|r| mapping.apply(r)).collect::<Result<Vec<_>>>()?;
            if mapped.is_empty() {
                let header = tables::score_header("f", cfg.fixed_depth()?.bins());
                let mut w = csv::Writer::from_writer(create(&output)?);
                w.write_record(&header)?;
                w.flush().map_err(|e| Error::Io {
                    path: output.clone(),
                    source: e,
                })?;
            } else {
                tables::write_scores(create(&output)?, "f", &mapped)?;
            }
        }
        Command::Check { report } => {
            let results = run_all(&cfg)?;
            let path = report.unwrap_or_else(|| cfg.output_dir.join("check_report.csv"));
            write_report_csv(&results, create(&path)?)?;
            let mut all = true;
            for r in &results {
                all &= r.passed;
                println!(
                    "{} {:<32} metric={:.3e} threshold={:.3e} ({:.1} ms)",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.metric,
                    r.threshold,
                    r.elapsed.as_secs_f64() * 1e3
                );
                if !r.passed {
                    println!("     violated: {} ({})", r.name, r.detail);
                }
            }
            println!("report: {}", path.display());
            return Ok(all);
        }
        Command::Revolve { angles, scenes, output } => {
            let grid = cfg.grid()?;
            let center = cfg.azimuth_center()?;
            let field = RadialBasisField::radial(&grid, center);
            let kernel = cfg.kernel()?;
            if kernel.in_channels() != 1 {
                return Err(Error::Config(format!(
                    "synthetic scenes have one channel; set in_channels=1 (kernel has {})",
                    kernel.in_channels()
                )));
            }
            let plan = GatherPlan::build(&field, kernel.extent())?;
            let mut reports = Vec::new();
            for s in 0..scenes as u64 {
                let scene = SyntheticScene::random(grid, center, 6, cfg.seed.wrapping_add(s));
                for &deg in &angles {
                    reports.push(run_revolve_with_plan(&scene, &kernel, &plan, deg.to_radians())?);
                }
            }
            let path = output.unwrap_or_else(|| cfg.output_dir.join("revolve.csv"));
            write_reports_csv(&reports, create(&path)?)?;
            for r in &reports {
                println!(
                    "{:>7.2} deg  aeconv {:.3e}  standard {:.3e}  resample {:.3e}",
                    r.angle.to_degrees(),
                    r.aeconv_rel_l2,
                    r.standard_rel_l2,
                    r.resample_rel_l2
                );
            }
        }
        Command::Bench { sizes, output } => {
            let rows = run_bench(
                &sizes,
                cfg.in_channels,
                cfg.kernel_extent,
                cfg.bench_repetitions,
                cfg.seed,
            )?;
            let path = output.unwrap_or_else(|| cfg.output_dir.join("bench.csv"));
            write_bench_csv(&rows, create(&path)?)?;
            write_bench_csv(&rows, std::io::stdout().lock())?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
