//! PRI-versus-index scatter plots (SVG plus CSV) and difference histograms.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pulseflow::classical::{toa_diff_histogram, Binning, ClassicalParams};
use pulseflow::simulator::{generate_pri_sequence, read_dataset, PriPattern};

use crate::args::PlotArgs;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// One scatter point: pulse index, PRI in us, series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub index: usize,
    pub pri: f64,
    pub series: usize,
}

/// The five reference panels.
pub fn figure_panels() -> Vec<(&'static str, PriPattern)> {
    vec![
        ("a_constant", PriPattern::constant(500.0)),
        ("b_jitter", PriPattern::jitter(500.0, 0.10)),
        ("c_constant_stagger", PriPattern::constant_stagger(vec![500.0, 400.0, 600.0], 0.0)),
        ("d_random_stagger", PriPattern::random_stagger(vec![400.0, 500.0, 600.0], 0.0)),
        ("e_switch_dwell", PriPattern::switch_dwell(vec![600.0, 400.0, 500.0], vec![5, 7, 3], 0.0)),
    ]
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("`{v}` is not a number")))
        .collect()
}

fn deviation(s: Option<&str>) -> Result<f64> {
    s.map_or(Ok(0.0), |v| v.trim().parse().with_context(|| format!("`{v}` is not a deviation")))
}

/// Parse `kind:levels[:extra]`:
///
/// - `constant:500[:dev]`
/// - `jitter:500:0.1`
/// - `stagger:500,400,600[:dev]`
/// - `random-stagger:400,500,600[:dev]`
/// - `dwell:600,400,500:5,7,3[:dev]`
pub fn parse_pattern(spec: &str) -> Result<PriPattern> {
    let parts: Vec<&str> = spec.split(':').collect();
    let levels = || numbers(parts.get(1).copied().unwrap_or_default());
    let single = |name: &str| -> Result<f64> {
        match levels()?.as_slice() {
            [v] => Ok(*v),
            _ => bail!("`{name}` takes a single PRI"),
        }
    };
    let pattern = match parts[0] {
        "constant" if parts.len() <= 3 => {
            let mut p = PriPattern::constant(single("constant")?);
            p.deviation_frac = deviation(parts.get(2).copied())?;
            p
        }
        "jitter" if parts.len() == 3 => PriPattern::jitter(single("jitter")?, deviation(Some(parts[2]))?),
        "stagger" if (2..=3).contains(&parts.len()) => {
            PriPattern::constant_stagger(levels()?, deviation(parts.get(2).copied())?)
        }
        "random-stagger" if (2..=3).contains(&parts.len()) => {
            PriPattern::random_stagger(levels()?, deviation(parts.get(2).copied())?)
        }
        "dwell" if (3..=4).contains(&parts.len()) => {
            let dwells = parts[2]
                .split(',')
                .map(|d| d.trim().parse::<u32>().with_context(|| format!("`{d}` is not a dwell count")))
                .collect::<Result<Vec<_>>>()?;
            PriPattern::switch_dwell(levels()?, dwells, deviation(parts.get(3).copied())?)
        }
        _ => bail!(
            "invalid pattern `{spec}`: expected constant:PRI[:DEV], jitter:PRI:DEV, stagger:PRIS[:DEV], \
             random-stagger:PRIS[:DEV] or dwell:PRIS:DWELLS[:DEV]"
        ),
    };
    pattern.validate().with_context(|| format!("invalid pattern `{spec}`"))?;
    Ok(pattern)
}

pub fn pattern_points(pattern: &PriPattern, count: usize, seed: u64) -> Result<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pris = generate_pri_sequence(pattern, count, &mut rng)?;
    Ok(pris
        .into_iter()
        .enumerate()
        .map(|(index, pri)| Point { index, pri, series: 0 })
        .collect())
}

/// Arrival times whose successive differences are the plotted PRIs.
fn points_toas(points: &[Point]) -> Vec<f64> {
    let mut t = 0.0;
    std::iter::once(0.0)
        .chain(points.iter().map(|p| {
            t += p.pri;
            t
        }))
        .collect()
}

/// Per-emitter PRIs of a labeled record, placed at the index of the later
/// pulse of each pair.
fn record_points(toas: &[f64], labels: &[u32]) -> Vec<Point> {
    let mut ids: Vec<u32> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut last: Vec<Option<usize>> = vec![None; ids.len()];
    let mut points = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let series = ids.binary_search(l).expect("label present");
        if let Some(j) = last[series] {
            points.push(Point {
                index: i,
                pri: toas[i] - toas[j],
                series,
            });
        }
        last[series] = Some(i);
    }
    points
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

pub fn render_svg(title: &str, points: &[Point]) -> String {
    let max_index = points.iter().map(|p| p.index).max().unwrap_or(1).max(1) as f64;
    let (mut lo, mut hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.pri), hi.max(p.pri)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.1).max(hi.abs() * 0.05).max(1.0);
    let step = nice_step(hi - lo + 2.0 * pad);
    let (y0, y1) = (((lo - pad) / step).floor() * step, ((hi + pad) / step).ceil() * step);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x = |i: f64| MARGIN + plot_w * i / max_index;
    let y = |v: f64| HEIGHT - MARGIN - plot_h * (v - y0) / (y1 - y0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let mut v = y0;
    while v <= y1 + step * 1e-9 {
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" x2="{}" y1="{yy:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{v}</text>"##,
            WIDTH - MARGIN,
            MARGIN - 6.0,
            y(v) + 4.0,
            yy = y(v),
        );
        v += step;
    }
    let xstep = nice_step(max_index).max(1.0);
    let mut i = 0.0;
    while i <= max_index + 1e-9 {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{i}</text>"#,
            x(i),
            HEIGHT - MARGIN + 16.0
        );
        i += xstep;
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">pulse index</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">PRI (us)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for p in points {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
            x(p.index as f64),
            y(p.pri),
            PALETTE[p.series % PALETTE.len()]
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn points_csv(points: &[Point]) -> String {
    let mut s = String::from("index,pri_us,series\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.index, p.pri, p.series);
    }
    s
}

/// First-level difference histogram of `toas` as `bin_low_us,count`.
fn histogram_csv(toas: &[f64]) -> Result<String> {
    let params = ClassicalParams::default();
    let span = toas.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let tau_max = params.tau_max.max(1.5 * span);
    let binning = Binning::default();
    let hist = toa_diff_histogram(toas, 1, binning, tau_max)?;
    let mut s = String::from("bin_low_us,count\n");
    for (k, count) in hist.iter() {
        if count > 0 {
            let _ = writeln!(s, "{},{count}", binning.lower(k));
        }
    }
    Ok(s)
}

fn write_panel(dir: &Path, stem: &str, title: &str, points: &[Point], toas: &[f64]) -> Result<()> {
    let write = |ext: &str, body: String| {
        let path = dir.join(format!("{stem}.{ext}"));
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    };
    write("svg", render_svg(title, points))?;
    write("csv", points_csv(points))?;
    write("hist.csv", histogram_csv(toas)?)?;
    println!("{stem}: {} points", points.len());
    Ok(())
}

pub fn run(a: PlotArgs) -> Result<()> {
    ensure!(a.count >= 1, "--count must be at least 1");
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    if a.figure {
        for (stem, pattern) in figure_panels() {
            let points = pattern_points(&pattern, a.count, a.seed)?;
            write_panel(&a.out, stem, stem, &points, &points_toas(&points))?;
        }
    } else if let Some(spec) = &a.pattern {
        let pattern = parse_pattern(spec)?;
        let points = pattern_points(&pattern, a.count, a.seed)?;
        write_panel(&a.out, "pattern", spec, &points, &points_toas(&points))?;
    } else if let Some(data) = &a.data {
        let ds = read_dataset(data)?;
        let Some(r) = ds.records.get(a.record) else {
            bail!("record {} out of range ({} records)", a.record, ds.records.len());
        };
        let points = record_points(&r.toas, &r.labels);
        let title = format!("record {} (case {})", a.record, r.case);
        write_panel(&a.out, &format!("record{}", a.record), &title, &points, &r.toas)?;
    } else {
        bail!("give one of --pattern, --data or --figure");
    }
    Ok(())
}
