//! Minimal SVG charts for library, spectra and noise CSV files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;
use crate::meta::ensure_dir;
use crate::PlotArgs;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];
const NOISE_HEADER: &str =
    "wavelength_nm,signal_mean,noise_mean,noise_variance,kl_poisson,kl_constant";

/// A numeric CSV: header names and columns of values.
struct Table {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn parse_table(path: &Path, text: &str) -> Result<Table, CliError> {
    let bad = |msg: String| CliError::Usage(format!("{}: {msg}", path.display()));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("file is empty".into()))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.len() < 2 || names[0] != "wavelength_nm" {
        return Err(bad("expected a 'wavelength_nm,...' header".into()));
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(bad(format!(
                "line {}: expected {} fields",
                i + 2,
                names.len()
            )));
        }
        for (col, f) in columns.iter_mut().zip(fields) {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| bad(format!("line {}: '{}' is not a number", i + 2, f.trim())))?;
            col.push(v);
        }
    }
    if columns[0].len() < 2 {
        return Err(bad("need at least two data rows".into()));
    }
    Ok(Table { names, columns })
}

/// Linear map from data bounds to the plotting area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new<'a>(
        xs: impl IntoIterator<Item = &'a f64>,
        ys: impl IntoIterator<Item = &'a f64>,
    ) -> Self {
        Self {
            x: bounds(xs),
            y: bounds(ys),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn polyline(&self, xs: &[f64], ys: &[f64], color: &str, extra: &str) -> String {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"{extra}/>\n",
            pts.join(" ")
        )
    }
}

fn bounds<'a>(values: impl IntoIterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn document(title: &str, frame: &Frame, xlabel: &str, ylabel: &str, body: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        "<path d=\"M{x0},{y1} L{x0},{y0} L{x1},{y0}\" fill=\"none\" stroke=\"black\"/>"
    );
    for (v, pos) in [(frame.x.0, x0), (frame.x.1, x1)] {
        let _ = writeln!(
            s,
            "<text x=\"{pos}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
            y0 + 16.0,
            tick(v)
        );
    }
    for (v, pos) in [(frame.y.0, y0), (frame.y.1, y1)] {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{pos}\" text-anchor=\"end\" font-size=\"11\">{}</text>",
            x0 - 4.0,
            tick(v)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 {})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn write_svg(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| CliError::io(path, e))
}

fn legend(names: &[String]) -> String {
    let mut s = String::new();
    for (i, n) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let x = WIDTH - MARGIN - 110.0;
        let _ = writeln!(
            s,
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"2\"/>",
            x + 16.0,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>",
            x + 20.0,
            y + 4.0,
            escape(n)
        );
    }
    s
}

fn plot_curves(table: &Table, max_curves: usize, out: &Path) -> Result<(), CliError> {
    let n = (table.names.len() - 1).min(max_curves.max(1));
    let wl = &table.columns[0];
    let curves = &table.columns[1..=n];
    let frame = Frame::new(wl, curves.iter().flatten().chain([&0.0]));
    let mut body = String::new();
    for (i, (name, ys)) in table.names[1..=n].iter().zip(curves).enumerate() {
        body += &frame.polyline(
            wl,
            ys,
            PALETTE[i % PALETTE.len()],
            &format!(" data-label=\"{}\"", escape(name)),
        );
    }
    if n <= 12 {
        body += &legend(&table.names[1..=n]);
    }
    let title = if n < table.names.len() - 1 {
        format!("{n} of {} spectra", table.names.len() - 1)
    } else {
        format!("{n} spectra")
    };
    write_svg(
        &out.join("spectra.svg"),
        &document(&title, &frame, "wavelength (nm)", "intensity", &body),
    )
}

/// Least-squares line through `(x, y)`.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

fn plot_noise(table: &Table, out: &Path) -> Result<(), CliError> {
    let (wl, signal, var) = (&table.columns[0], &table.columns[1], &table.columns[3]);
    let frame = Frame::new(signal, var);
    let mut body = String::new();
    for (&x, &y) in signal.iter().zip(var) {
        let _ = writeln!(
            body,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\"/>",
            frame.px(x),
            frame.py(y),
            PALETTE[0]
        );
    }
    let (slope, intercept) = fit_line(signal, var);
    let ends = [frame.x.0, frame.x.1];
    let fitted = ends.map(|x| slope * x + intercept);
    body += &frame.polyline(
        &ends,
        &fitted,
        PALETTE[3],
        &format!(" data-slope=\"{slope}\" data-intercept=\"{intercept}\""),
    );
    write_svg(
        &out.join("mean_variance.svg"),
        &document(
            &format!("noise variance vs mean signal (slope {slope:.4})"),
            &frame,
            "mean signal",
            "noise variance",
            &body,
        ),
    )?;

    let kl = &table.columns[4..6];
    let frame = Frame::new(wl, kl.iter().flatten());
    let names = vec!["signal-dependent".to_string(), "constant".to_string()];
    let mut body = String::new();
    for (i, ys) in kl.iter().enumerate() {
        body += &frame.polyline(wl, ys, PALETTE[i], &format!(" data-label=\"{}\"", names[i]));
    }
    body += &legend(&names);
    write_svg(
        &out.join("kl.svg"),
        &document(
            "KL divergence per wavelength",
            &frame,
            "wavelength (nm)",
            "KL",
            &body,
        ),
    )
}

pub fn run(args: &PlotArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| CliError::io(&args.input, e))?;
    let table = parse_table(&args.input, &text)?;
    let out = ensure_dir(&args.out)?;
    if text
        .lines()
        .next()
        .is_some_and(|h| h.trim() == NOISE_HEADER)
    {
        plot_noise(&table, &out)?;
        println!("wrote mean_variance.svg and kl.svg to {}", out.display());
    } else {
        plot_curves(&table, args.max_curves, &out)?;
        println!("wrote spectra.svg to {}", out.display());
    }
    Ok(())
}
