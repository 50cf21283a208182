use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use fracvar::acceptance;
use fracvar::decomp::{decompose, fractal_certificate, interpolation_lp_check, rate_fit, MassRecord, Window};
use fracvar::degree::{affine_degree_field, degree_at, degree_refinement, sample_map};
use fracvar::fractal::koch::{koch_ledger_capped, DEFAULT_TRIANGLE_CAP};
use fracvar::fractal::{boundary_cells, box_counting, koch_dimension, koch_indicator, snowflake_grid, whitney};
use fracvar::holder::HolderFunction;
use fracvar::io::{load_grid_function, save_grid_function, write_pgm};
use fracvar::maps::{self, LinearMap, ShearPair};
use fracvar::pushforward::{diffeo_oracle, pushforward, pushforward_convergence, Diffeomorphism};
use fracvar::variation::{standard_suite, valpha_lower, SuiteConfig};
use fracvar::young::{circle_table, young_ratio, LacunaryPair};
use fracvar::{DyadicGrid, Error, GridFunction, Result};
use serde::Serialize;
use serde_json::json;

use crate::output::{num, opt, Output};

/// Result of a command that ran to completion.
pub enum Status {
    Ok,
    /// Some acceptance check failed.
    ReportFailed,
}

/// Field to operate on: a saved grid function, or the snowflake indicator.
#[derive(Args, Debug, Serialize)]
pub struct InputArgs {
    /// Grid function header written by `save_grid_function` (JSON + CSV).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Snowflake generation used when no input is given.
    #[arg(long, default_value_t = 8)]
    pub level: u32,
    /// Grid depth of the snowflake indicator.
    #[arg(long, default_value_t = 10)]
    pub depth: u32,
}

impl InputArgs {
    fn load(&self) -> Result<(GridFunction, bool)> {
        match &self.input {
            Some(path) => Ok((load_grid_function(path)?, false)),
            None => {
                let led = koch_ledger_capped(self.level, 1.0, DEFAULT_TRIANGLE_CAP)?;
                let grid = snowflake_grid(&led, self.depth)?;
                Ok((koch_indicator(&led, &grid, self.level)?, true))
            }
        }
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg.into()))
    }
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct KochArgs {
    /// Number of generations.
    #[arg(long, default_value_t = 8)]
    pub level: u32,
    /// Side length of the base triangle.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub s0: f64,
    /// Depth of the raster grid.
    #[arg(long, default_value_t = 10)]
    pub depth: u32,
    /// Coarsest box-counting scale.
    #[arg(long, default_value_t = 2)]
    pub kmin: u32,
    /// Finest box-counting scale; defaults to min(level, depth).
    #[arg(long)]
    pub kmax: Option<u32>,
    /// Upper bound on the number of triangles.
    #[arg(long, default_value_t = DEFAULT_TRIANGLE_CAP)]
    pub cap: u64,
}

pub fn koch(a: &KochArgs, mut out: Output) -> Result<Status> {
    let led = koch_ledger_capped(a.level, a.s0, a.cap)?;
    out.table(
        "ledger.csv",
        &[
            "k",
            "triangles",
            "side",
            "mass",
            "closed_form_mass",
            "boundary_mass",
            "closed_form_boundary_mass",
        ],
        led.generations.iter().map(|g| {
            vec![
                g.k.to_string(),
                g.triangles.len().to_string(),
                num(g.side),
                num(g.mass()),
                num(led.closed_form_mass(g.k)),
                num(g.boundary_mass()),
                num(led.closed_form_boundary_mass(g.k)),
            ]
        }),
    )?;
    let worst = led
        .generations
        .iter()
        .map(|g| {
            let m = (g.mass() - led.closed_form_mass(g.k)).abs() / led.closed_form_mass(g.k);
            let b = (g.boundary_mass() - led.closed_form_boundary_mass(g.k)).abs() / led.closed_form_boundary_mass(g.k);
            m.max(b)
        })
        .fold(0.0, f64::max);

    let grid = snowflake_grid(&led, a.depth)?;
    let u = koch_indicator(&led, &grid, a.level)?;
    save_grid_function(&u, out.dir(), "indicator")?;
    out.file("indicator.json");
    out.file("indicator.csv");
    write_pgm(&u, &out.file("indicator.pgm"))?;

    let kmax = a.kmax.unwrap_or(a.level.min(a.depth));
    let cells = boundary_cells(&u);
    let bc = box_counting(&grid, &cells, a.kmin, kmax)?;
    out.table(
        "boxcount.csv",
        &["k", "boxes"],
        bc.counts.iter().map(|(k, c)| vec![k.to_string(), c.to_string()]),
    )?;
    let area: f64 = u.values().iter().sum::<f64>() * grid.cell_volume();
    out.finish(
        "koch",
        a,
        &json!({
            "triangles": led.generations.iter().map(|g| g.triangles.len()).sum::<usize>(),
            "max_relative_error": worst,
            "raster_area": area,
            "box_dimension": bc.dimension,
            "reference_dimension": koch_dimension(),
            "box_fit": bc.fit,
        }),
    )?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct WhitneyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Finest Whitney level; defaults to the grid depth.
    #[arg(long)]
    pub max_scale: Option<u32>,
}

pub fn whitney_cmd(a: &WhitneyArgs, mut out: Output) -> Result<Status> {
    let (u, _) = a.input.load()?;
    let dec = whitney(&u, a.max_scale.unwrap_or(u.grid().depth()))?;
    out.table(
        "whitney.csv",
        &["k", "side", "cubes"],
        dec.levels
            .iter()
            .map(|l| vec![l.k.to_string(), num(l.side), l.count().to_string()]),
    )?;
    out.finish(
        "whitney",
        a,
        &json!({
            "volume": dec.volume,
            "covered_volume": dec.covered_volume(),
            "residual": dec.residual,
            "cubes": dec.levels.iter().map(|l| l.count()).sum::<usize>(),
        }),
    )?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct DecomposeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// First level of the rate fit.
    #[arg(long, default_value_t = 2)]
    pub kmin: u32,
    /// Last level of the rate fit.
    #[arg(long, default_value_t = 8)]
    pub kmax: u32,
    /// Claimed variation exponent; the snowflake default is its dimension minus one.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Exponents for the interpolation check.
    #[arg(long, value_delimiter = ',', default_values_t = [1.3, 3.0])]
    pub p: Vec<f64>,
}

pub fn decompose_cmd(a: &DecomposeArgs, mut out: Output) -> Result<Status> {
    let (u, snowflake) = a.input.load()?;
    let mut led = decompose(&u);
    let alpha = a.alpha.or(snowflake.then(|| koch_dimension() - 1.0));
    if let Some(al) = alpha {
        led = led.with_alpha(al);
    }
    let path = out.file("levels.csv");
    led.write_csv(&path)?;
    let fit = rate_fit(&led, Window::new(a.kmin, a.kmax))?;
    let reports =
        a.p.iter()
            .map(|&p| interpolation_lp_check(&led, p))
            .collect::<Result<Vec<_>>>()?;
    out.table(
        "interpolation.csv",
        &["p", "k", "l1", "tv", "lq", "bound", "partial_sum"],
        reports.iter().flat_map(|r| {
            r.levels.iter().map(move |l| {
                vec![
                    num(r.p),
                    l.k.to_string(),
                    num(l.l1),
                    num(l.tv),
                    num(l.lq),
                    num(l.bound),
                    num(l.partial_sum),
                ]
            })
        }),
    )?;
    let checks: Vec<_> = reports
        .iter()
        .map(|r| json!({"p": r.p, "slope": r.slope, "margin": r.margin, "converged": r.converged}))
        .collect();
    out.finish(
        "decompose",
        a,
        &json!({
            "alpha": alpha,
            "slope_tv": fit.slope_tv(),
            "slope_l1": fit.slope_l1(),
            "rate_fit": fit,
            "interpolation": checks,
        }),
    )?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct VarestArgs {
    /// Grid function header; defaults to the snowflake indicator.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Snowflake generation used when no input is given.
    #[arg(long, default_value_t = 6)]
    pub level: u32,
    /// Grid depth of the snowflake indicator.
    #[arg(long, default_value_t = 8)]
    pub depth: u32,
    /// Hölder exponent of the first test-map component.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = SuiteConfig::default().seed)]
    pub seed: u64,
    /// Number of random piecewise-affine test maps.
    #[arg(long, default_value_t = SuiteConfig::default().random_members)]
    pub members: usize,
    /// Depth on which random vertex values are drawn.
    #[arg(long, default_value_t = SuiteConfig::default().random_depth)]
    pub random_depth: u32,
}

pub fn varest(a: &VarestArgs, mut out: Output) -> Result<Status> {
    let input = InputArgs {
        input: a.input.clone(),
        level: a.level,
        depth: a.depth,
    };
    let (u, _) = input.load()?;
    let cfg = SuiteConfig {
        seed: a.seed,
        random_members: a.members,
        random_depth: a.random_depth,
        ..SuiteConfig::default()
    };
    let suite = standard_suite(u.grid(), &cfg)?;
    let est = valpha_lower(&u, a.alpha, &suite)?;
    out.table(
        "witnesses.csv",
        &["id", "pairing", "holder_f", "oscillation_f", "lipschitz_g", "value"],
        est.witnesses.iter().map(|w| {
            vec![
                w.id.clone(),
                num(w.pairing),
                num(w.holder_f),
                num(w.oscillation_f),
                num(w.lipschitz_g.iter().product()),
                num(w.value),
            ]
        }),
    )?;
    out.finish(
        "varest",
        a,
        &json!({
            "valpha_lower": est.value,
            "witness": est.witness.as_ref().map(|w| &w.id),
            "members": est.witnesses.len(),
            "skipped": est.skipped,
            "total_variation": u.total_variation(),
        }),
    )?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegreeMap {
    /// Identity of the unit square.
    Identity,
    /// Coordinate swap on the unit square.
    Swap,
    /// `(x, y) ↦ (1 − x, y)` on the unit square.
    Reflection,
    /// `z ↦ z²` on `[−1, 1]²`.
    Square,
    /// Hölder winding map on the unit square.
    Winding,
}

#[derive(Args, Debug, Serialize)]
pub struct DegreeArgs {
    #[arg(long, value_enum, default_value_t = DegreeMap::Identity)]
    pub map: DegreeMap,
    /// Sampling depth of the map.
    #[arg(long, default_value_t = 6)]
    pub depth: u32,
    /// Depth of the target grid; defaults to the sampling depth.
    #[arg(long)]
    pub target_depth: Option<u32>,
    /// Half-width of the target cube; defaults to the map's natural range.
    #[arg(long, allow_negative_numbers = true)]
    pub target_half_width: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
    pub p: Vec<f64>,
    /// Hölder exponent of the winding map.
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Number of terms of the winding map.
    #[arg(long, default_value_t = 24)]
    pub terms: usize,
    /// Also evaluate the degree at this point (`x,y`).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub query: Option<Vec<f64>>,
    /// Sampling depths of a refinement study.
    #[arg(long, value_delimiter = ',')]
    pub refine: Option<Vec<u32>>,
    /// Dimension in the integrability threshold τ/d of the refinement study.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub d: f64,
}

/// Source cube, components and default target cube `(center, half-width)`.
fn degree_setup(a: &DegreeArgs) -> Result<(DyadicGrid, Vec<HolderFunction>, [f64; 2], f64)> {
    let unit = DyadicGrid::new(2, &[0.5, 0.5], 0.5, 0)?;
    Ok(match a.map {
        DegreeMap::Identity => (unit, maps::identity_components(2), [0.5, 0.5], 0.5),
        DegreeMap::Swap => (unit, maps::swap_components(), [0.5, 0.5], 0.5),
        DegreeMap::Reflection => {
            let mut c = maps::identity_components(2);
            c[0] = HolderFunction::new(|x: &[f64]| 1.0 - x[0], 1.0, 1.0)?;
            (unit, c, [0.5, 0.5], 0.5)
        }
        DegreeMap::Square => (
            DyadicGrid::new(2, &[0.0, 0.0], 1.0, 0)?,
            maps::complex_square_components(),
            [0.0, 0.0],
            2.0,
        ),
        DegreeMap::Winding => (
            unit,
            maps::winding_components(a.alpha, a.terms, &unit)?,
            [0.0, 0.0],
            2.0,
        ),
    })
}

pub fn degree(a: &DegreeArgs, mut out: Output) -> Result<Status> {
    let (cube, comps, center, hw) = degree_setup(a)?;
    let target = DyadicGrid::new(
        2,
        &center,
        a.target_half_width.unwrap_or(hw),
        a.target_depth.unwrap_or(a.depth),
    )?;
    let map = sample_map(&comps, &cube, a.depth)?;
    let mut field = affine_degree_field(&map, &target)?;
    field.source.map_id = format!("{:?}", a.map).to_lowercase();
    field.export(out.dir(), "degree")?;
    out.file("degree.json");
    out.file("degree.csv");
    out.file("degree.pgm");
    let norms = a.p.iter().map(|&p| field.lp_norm(p)).collect::<Result<Vec<_>>>()?;
    out.table(
        "norms.csv",
        &["p", "norm"],
        a.p.iter().zip(&norms).map(|(p, n)| vec![num(*p), num(*n)]),
    )?;
    if let Some(q) = &a.query {
        check(q.len() == 2, format!("query needs two coordinates, got {}", q.len()))?;
    }
    let query = match &a.query {
        Some(q) => Some(json!({"point": q, "degree": degree_at(&map, q)?})),
        None => None,
    };
    let refinement = match &a.refine {
        Some(depths) => {
            let rep = degree_refinement(&comps, &cube, depths, &target, &a.p, a.d)?;
            rep.write_csv(&out.file("refinement.csv"))?;
            Some(json!({
                "tau": rep.tau,
                "near_critical": rep.near_critical,
                "slopes": rep.slopes,
                "warnings": rep.levels.iter().filter_map(|l| l.warning.clone()).collect::<Vec<_>>(),
            }))
        }
        None => None,
    };
    out.finish(
        "degree",
        a,
        &json!({
            "norms": norms,
            "integral": field.integral(),
            "flagged_cells": field.flagged().len(),
            "degenerate_simplices": field.degenerate_simplices(),
            "query": query,
            "refinement": refinement,
        }),
    )?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PushMap {
    /// Composition of two sine shears, a diffeomorphism of the plane.
    Shear,
    Identity,
    /// Hölder winding map on `[−1, 1]²`.
    Winding,
}

#[derive(Args, Debug, Serialize)]
pub struct PushforwardArgs {
    /// Grid function header; defaults to the indicator of `[−1/2, 1/2]²` on `[−1, 1]²`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PushMap::Shear)]
    pub map: PushMap,
    /// Level on which the input is constant.
    #[arg(long, default_value_t = 2)]
    pub block_depth: u32,
    /// Sampling depth of the map.
    #[arg(long, default_value_t = 8)]
    pub depth: u32,
    /// Sampling depths of a convergence study (uses the first `p`).
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<u32>>,
    #[arg(long, default_value_t = 9)]
    pub target_depth: u32,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub target_half_width: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
    pub p: Vec<f64>,
    /// Dimension in the hypothesis τ > d.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub d: f64,
    /// Compare with the change-of-variables formula (diffeomorphisms only).
    #[arg(long)]
    pub oracle: bool,
    /// Hölder exponent of the winding map.
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 24)]
    pub terms: usize,
}

pub fn pushforward_cmd(a: &PushforwardArgs, mut out: Output) -> Result<Status> {
    check(!a.p.is_empty(), "need at least one p")?;
    let u = match &a.input {
        Some(path) => load_grid_function(path)?,
        None => GridFunction::from_sampler(DyadicGrid::unit(2, 2)?, |x| {
            ((-0.5..0.5).contains(&x[0]) && (-0.5..0.5).contains(&x[1])) as u8 as f64
        })?,
    };
    check(u.grid().dim() == 2, "the named maps are 2-D")?;
    let g = u.grid();
    let cube = DyadicGrid::new(2, g.center(), g.half_width(), 0)?;
    let diffeo: Option<Arc<dyn Diffeomorphism>> = match a.map {
        PushMap::Shear => Some(Arc::new(ShearPair::default())),
        PushMap::Identity => Some(Arc::new(LinearMap::new2([[1.0, 0.0], [0.0, 1.0]])?)),
        PushMap::Winding => None,
    };
    let comps = match a.map {
        PushMap::Shear => {
            let s = Arc::new(ShearPair::default());
            maps::diffeo_components(s.clone(), s.lipschitz_bound())
        }
        PushMap::Identity => maps::identity_components(2),
        PushMap::Winding => maps::winding_components(a.alpha, a.terms, &cube)?,
    };
    let target = DyadicGrid::new(2, &[0.0, 0.0], a.target_half_width, a.target_depth)?;
    let r = pushforward(&u, &comps, a.block_depth, a.depth, &target, &a.p, a.d)?;
    save_grid_function(r.density(), out.dir(), "density")?;
    out.file("density.json");
    out.file("density.csv");
    write_pgm(r.density(), &out.file("density.pgm"))?;
    out.table(
        "norms.csv",
        &["p", "norm"],
        r.p.iter().zip(&r.norms).map(|(p, n)| vec![num(*p), num(*n)]),
    )?;
    let oracle_gap = if a.oracle {
        let phi = diffeo.ok_or_else(|| Error::InvalidParameter("the oracle needs a diffeomorphism".into()))?;
        let v = diffeo_oracle(&u, phi.as_ref(), &target)?;
        Some(r.density().combine(1.0, &v, -1.0)?.lp_norm(1.0)?)
    } else {
        None
    };
    let convergence = match &a.depths {
        Some(depths) => {
            let t = pushforward_convergence(&u, &comps, a.block_depth, depths, &target, a.p[0], a.d)?;
            out.table(
                "convergence.csv",
                &["depth", "norm", "diff"],
                t.rows
                    .iter()
                    .map(|row| vec![row.depth.to_string(), num(row.norm), opt(row.diff)]),
            )?;
            Some(
                json!({"p": t.p, "fit": t.fit, "margin": t.margin, "cauchy": t.cauchy, "non_decreasing": t.non_decreasing}),
            )
        }
        None => None,
    };
    out.finish(
        "pushforward",
        a,
        &json!({
            "norms": r.norms,
            "exponents": r.exponents,
            "flagged_cells": r.flagged_cells,
            "oracle_l1_gap": oracle_gap,
            "convergence": convergence,
        }),
    )?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct YoungArgs {
    /// Exponent of the circle pair; `f_k` carries weights `2^{−j(1−α)}`.
    #[arg(long, default_value_t = 0.63, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 6)]
    pub kmax: usize,
    /// Number of knots.
    #[arg(long, default_value_t = 65536)]
    pub n: usize,
    /// Also compare N and 2N sums for a lacunary pair with exponents α, β on [0, 2π].
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 20)]
    pub terms: usize,
}

pub fn young(a: &YoungArgs, mut out: Output) -> Result<Status> {
    let rows = circle_table(a.alpha, a.kmax, a.n)?;
    out.table(
        "circle.csv",
        &["k", "computed", "expected", "relative_error"],
        rows.iter()
            .map(|r| vec![r.k.to_string(), num(r.computed), num(r.expected), num(r.relative_error)]),
    )?;
    let ratio = match a.beta {
        Some(beta) => {
            let pair = LacunaryPair {
                alpha: a.alpha,
                beta,
                amplitude: a.amplitude,
                terms: a.terms,
            };
            let r = young_ratio(|t| pair.f(t), |t| pair.g(t), a.alpha, beta, PI, PI, a.n)?;
            out.table(
                "ratio.csv",
                &[
                    "n",
                    "integral_n",
                    "integral_2n",
                    "ratio_n",
                    "ratio_2n",
                    "relative_change",
                ],
                [vec![
                    r.n.to_string(),
                    num(r.integral_n),
                    num(r.integral_2n),
                    num(r.ratio_n),
                    num(r.ratio_2n),
                    num(r.relative_change),
                ]],
            )?;
            Some(r)
        }
        None => None,
    };
    let worst = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    out.finish("young", a, &json!({"max_relative_error": worst, "ratio": ratio}))?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sequence {
    /// Masses of the `R_k` terms (exponent δ).
    R,
    /// Masses of the `S_k` terms (exponent γ).
    S,
}

#[derive(Args, Debug, Serialize)]
pub struct CertifyArgs {
    /// CSV with columns `k`, `mass`, `boundary_mass` (extra columns are ignored).
    #[arg(long)]
    pub ledger: PathBuf,
    /// Dimension of the current.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Geometric base of the weights.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub base: f64,
    #[arg(long, value_enum, default_value_t = Sequence::R)]
    pub sequence: Sequence,
    /// Records with smaller `k` are dropped.
    #[arg(long, default_value_t = 1)]
    pub kmin: i64,
}

pub fn certify(a: &CertifyArgs, mut out: Output) -> Result<Status> {
    let mut reader = csv::Reader::from_path(&a.ledger)?;
    let mut records = Vec::new();
    for rec in reader.deserialize::<MassRecord>() {
        let rec = rec?;
        if rec.k >= a.kmin {
            records.push(rec);
        }
    }
    let cert = match a.sequence {
        Sequence::R => fractal_certificate(a.n, a.base, Some(&records), None)?,
        Sequence::S => fractal_certificate(a.n, a.base, None, Some(&records))?,
    };
    let bound = cert
        .delta
        .as_ref()
        .or(cert.gamma.as_ref())
        .expect("one sequence was supplied");
    out.table(
        "certificate.csv",
        &[
            "sequence",
            "critical",
            "infimum",
            "in_range",
            "mass_slope",
            "boundary_slope",
        ],
        [vec![
            format!("{:?}", a.sequence).to_lowercase(),
            num(bound.critical),
            num(bound.infimum),
            bound.in_range.to_string(),
            num(bound.mass_fit.slope),
            num(bound.boundary_fit.slope),
        ]],
    )?;
    out.finish("certify", a, &cert)?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {}

pub fn report(a: &ReportArgs, mut out: Output) -> Result<Status> {
    let results = acceptance::run_all();
    for r in &results {
        println!("{}", r.line());
    }
    out.table(
        "report.csv",
        &["id", "name", "passed", "value_ok", "elapsed_ms", "limit_ms", "detail"],
        results.iter().map(|r| {
            vec![
                r.id.to_string(),
                r.name.clone(),
                r.passed().to_string(),
                r.value_ok.to_string(),
                r.elapsed_ms.to_string(),
                r.limit_ms.to_string(),
                r.detail.clone(),
            ]
        }),
    )?;
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed()).map(|r| r.id).collect();
    out.finish("report", a, &json!({"criteria": results, "failed": failed}))?;
    Ok(if failed.is_empty() {
        Status::Ok
    } else {
        Status::ReportFailed
    })
}
