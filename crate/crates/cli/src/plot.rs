//! Small deterministic PNG plots.
//!
//! Tick labels are drawn with a built-in 5×7 digit font; the title and axis
//! labels go into iTXt chunks (`Title`, `X-Label`, `Y-Label`) so the image
//! bytes depend only on the data and this code.

use std::fmt;

use serde::{Deserialize, Serialize};

const WIDTH: usize = 800;
const HEIGHT: usize = 600;
const LEFT: usize = 110;
const RIGHT: usize = 40;
const TOP: usize = 30;
const BOTTOM: usize = 60;
const SCALE: usize = 2;

type Rgb = [u8; 3];
const WHITE: Rgb = [255, 255, 255];
const BLACK: Rgb = [0, 0, 0];
const GREY: Rgb = [225, 225, 225];
const LINE: Rgb = [31, 90, 170];
const BAND: Rgb = [190, 210, 240];
const BAR: Rgb = [70, 130, 180];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    VarianceCurve,
    Ksweep,
    WignerHeatmap,
    NumberDistribution,
}

pub enum PlotData<'a> {
    /// `y(x)` with optional standard errors.
    Series { x: &'a [f64], y: &'a [f64], err: Option<&'a [f64]> },
    /// Bar heights at 0, 1, 2, …
    Bars { values: &'a [f64] },
    /// `values[i][j]` at `(x_axis[i], y_axis[j])`.
    Grid { x_axis: &'a [f64], y_axis: &'a [f64], values: &'a dyn Fn(usize, usize) -> f64 },
}

pub struct Labels<'a> {
    pub title: &'a str,
    pub x: &'a str,
    pub y: &'a str,
}

#[derive(Debug, PartialEq)]
pub enum PlotError {
    Unsupported(PlotKind, &'static str),
    Encode(String),
}

impl fmt::Display for PlotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlotError::Unsupported(k, why) => write!(f, "cannot draw {k:?}: {why}"),
            PlotError::Encode(m) => write!(f, "png encoding failed: {m}"),
        }
    }
}

impl std::error::Error for PlotError {}

/// Renders `data` as `kind` and returns PNG bytes.
pub fn emit_plot(data: &PlotData<'_>, kind: PlotKind, labels: &Labels<'_>) -> Result<Vec<u8>, PlotError> {
    let mut c = Canvas::new();
    match (kind, data) {
        (PlotKind::VarianceCurve, PlotData::Series { x, y, err }) => {
            check_series(kind, x, y, *err)?;
            c.series(x, y, *err, false);
        }
        (PlotKind::Ksweep, PlotData::Series { x, y, err }) => {
            check_series(kind, x, y, *err)?;
            if x.iter().any(|v| *v <= 0.0) {
                return Err(PlotError::Unsupported(kind, "log axis needs positive x"));
            }
            c.series(x, y, *err, true);
        }
        (PlotKind::NumberDistribution, PlotData::Bars { values }) => {
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(PlotError::Unsupported(kind, "need finite bar heights"));
            }
            c.bars(values);
        }
        (PlotKind::WignerHeatmap, PlotData::Grid { x_axis, y_axis, values }) => {
            if x_axis.len() < 2 || y_axis.len() < 2 {
                return Err(PlotError::Unsupported(kind, "grid needs at least 2×2 points"));
            }
            c.heatmap(x_axis, y_axis, *values);
        }
        _ => return Err(PlotError::Unsupported(kind, "data shape does not match plot kind")),
    }
    c.encode(labels)
}

fn check_series(kind: PlotKind, x: &[f64], y: &[f64], err: Option<&[f64]>) -> Result<(), PlotError> {
    if x.is_empty() || x.len() != y.len() || err.is_some_and(|e| e.len() != y.len()) {
        return Err(PlotError::Unsupported(kind, "series lengths differ or are empty"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(PlotError::Unsupported(kind, "series has non-finite values"));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PlotError::Unsupported(kind, "x must be strictly increasing"));
    }
    Ok(())
}

/// Maps a data interval onto a pixel interval.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
    log: bool,
}

impl Axis {
    fn new(lo: f64, hi: f64, p0: usize, p1: usize, log: bool) -> Self {
        let (lo, hi) = if log { (lo.log10(), hi.log10()) } else { (lo, hi) };
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { lo, hi, p0: p0 as f64, p1: p1 as f64, log }
    }

    fn px(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }
}

/// Tick positions at 1, 2 or 5 × 10ᵏ spacing.
fn nice_ticks(lo: f64, hi: f64, target: usize) -> (Vec<f64>, f64) {
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|i| i as f64 * step).collect(), step)
}

fn format_tick(v: f64, step: f64) -> String {
    if v.abs() < step * 1e-9 {
        return "0".into();
    }
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    if v.abs() >= 1e5 || decimals > 4 {
        format!("{v:.1e}")
    } else {
        format!("{v:.decimals$}")
    }
}

fn glyph(ch: char) -> Option<[u8; 7]> {
    Some(match ch {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '-' => [0, 0, 0, 0x1F, 0, 0, 0],
        '+' => [0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0],
        '.' => [0, 0, 0, 0, 0, 0x0C, 0x0C],
        'e' => [0, 0, 0x0E, 0x11, 0x1F, 0x10, 0x0E],
        _ => return None,
    })
}

/// Red above zero, blue below, white at zero; `t ∈ [−1, 1]`.
fn diverging(t: f64) -> Rgb {
    let t = t.clamp(-1.0, 1.0);
    let (end, a) = if t >= 0.0 { ([180.0, 4.0, 38.0], t) } else { ([59.0, 76.0, 192.0], -t) };
    let mix = |e: f64| (255.0 + (e - 255.0) * a).round() as u8;
    [mix(end[0]), mix(end[1]), mix(end[2])]
}

struct Canvas {
    px: Vec<u8>,
}

impl Canvas {
    fn new() -> Self {
        Self { px: WHITE.repeat(WIDTH * HEIGHT) }
    }

    fn set(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < WIDTH && (y as usize) < HEIGHT {
            let i = (y as usize * WIDTH + x as usize) * 3;
            self.px[i..i + 3].copy_from_slice(&c);
        }
    }

    fn rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb) {
        for y in y0.min(y1)..=y0.max(y1) {
            for x in x0.min(x1)..=x0.max(x1) {
                self.set(x, y, c);
            }
        }
    }

    /// Two-pixel-wide line by sampling along its length.
    fn line(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, c: Rgb) {
        let n = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let (x, y) = ((x0 + t * (x1 - x0)).round() as i64, (y0 + t * (y1 - y0)).round() as i64);
            self.rect(x, y, x + 1, y + 1, c);
        }
    }

    fn text_width(s: &str) -> usize {
        s.chars().count() * 6 * SCALE
    }

    fn text(&mut self, s: &str, x: i64, y: i64) {
        let mut cx = x;
        for ch in s.chars() {
            if let Some(rows) = glyph(ch) {
                for (r, bits) in rows.iter().enumerate() {
                    for col in 0..5 {
                        if bits & (0x10 >> col) != 0 {
                            let (px, py) = (cx + (col * SCALE) as i64, y + (r * SCALE) as i64);
                            self.rect(px, py, px + SCALE as i64 - 1, py + SCALE as i64 - 1, BLACK);
                        }
                    }
                }
            }
            cx += (6 * SCALE) as i64;
        }
    }

    fn frame(&mut self, right: usize) {
        let (x0, x1, y0, y1) = (LEFT as i64, (WIDTH - right) as i64, TOP as i64, (HEIGHT - BOTTOM) as i64);
        self.rect(x0, y0, x1, y0 + 1, BLACK);
        self.rect(x0, y1 - 1, x1, y1, BLACK);
        self.rect(x0, y0, x0 + 1, y1, BLACK);
        self.rect(x1 - 1, y0, x1, y1, BLACK);
    }

    fn x_ticks(&mut self, ax: &Axis, ticks: &[(f64, String)]) {
        for (v, label) in ticks {
            let x = ax.px(*v).round() as i64;
            let y = (HEIGHT - BOTTOM) as i64;
            self.rect(x, y, x + 1, y + 6, BLACK);
            self.text(label, x - Self::text_width(label) as i64 / 2, y + 12);
        }
    }

    fn y_ticks(&mut self, ax: &Axis, ticks: &[(f64, String)], grid_to: Option<usize>) {
        for (v, label) in ticks {
            let y = ax.px(*v).round() as i64;
            if let Some(right) = grid_to {
                self.rect(LEFT as i64 + 2, y, (WIDTH - right) as i64 - 2, y, GREY);
            }
            self.rect(LEFT as i64 - 6, y, LEFT as i64, y + 1, BLACK);
            self.text(label, LEFT as i64 - 10 - Self::text_width(label) as i64, y - (7 * SCALE) as i64 / 2);
        }
    }

    fn linear_ticks(lo: f64, hi: f64, target: usize) -> Vec<(f64, String)> {
        let (t, step) = nice_ticks(lo, hi, target);
        t.into_iter().map(|v| (v, format_tick(v, step))).collect()
    }

    fn y_range(lo: f64, hi: f64) -> (f64, f64) {
        let lo = lo.min(0.0);
        let pad = 0.05 * (hi - lo).max(1e-12);
        (lo, hi + pad)
    }

    fn series(&mut self, x: &[f64], y: &[f64], err: Option<&[f64]>, log_x: bool) {
        let e = |i: usize| err.map_or(0.0, |e| e[i].abs());
        let ymax = (0..y.len()).map(|i| y[i] + e(i)).fold(f64::MIN, f64::max);
        let ymin = (0..y.len()).map(|i| y[i] - e(i)).fold(f64::MAX, f64::min);
        let (ylo, yhi) = Self::y_range(ymin, ymax);
        let (xlo, xhi) = (x[0], x[x.len() - 1]);
        let (xlo, xhi) = if log_x { (xlo / 1.25, xhi * 1.25) } else { (xlo, xhi) };
        let ax = Axis::new(xlo, xhi, LEFT + 2, WIDTH - RIGHT - 2, log_x);
        let ay = Axis::new(ylo, yhi, HEIGHT - BOTTOM - 2, TOP + 2, false);

        let yt = Self::linear_ticks(ylo, yhi, 6);
        self.y_ticks(&ay, &yt, Some(RIGHT));
        if log_x {
            // dense error bars and markers at the sampled points
            for i in 0..x.len() {
                let px = ax.px(x[i]);
                if err.is_some() {
                    self.line(px, ay.px(y[i] - e(i)), px, ay.px(y[i] + e(i)), BLACK);
                    self.line(px - 5.0, ay.px(y[i] - e(i)), px + 5.0, ay.px(y[i] - e(i)), BLACK);
                    self.line(px - 5.0, ay.px(y[i] + e(i)), px + 5.0, ay.px(y[i] + e(i)), BLACK);
                }
                let (cx, cy) = (px.round() as i64, ay.px(y[i]).round() as i64);
                self.rect(cx - 4, cy - 4, cx + 4, cy + 4, LINE);
            }
            let labels: Vec<(f64, String)> = x.iter().map(|v| (*v, format_short(*v))).collect();
            self.x_ticks(&ax, &labels);
        } else {
            if err.is_some() {
                for i in 0..x.len() {
                    let px = ax.px(x[i]);
                    self.line(px, ay.px(y[i] - e(i)), px, ay.px(y[i] + e(i)), BAND);
                }
            }
            let xt = Self::linear_ticks(xlo, xhi, 8);
            self.x_ticks(&ax, &xt);
        }
        for i in 1..x.len() {
            self.line(ax.px(x[i - 1]), ay.px(y[i - 1]), ax.px(x[i]), ay.px(y[i]), LINE);
        }
        self.frame(RIGHT);
    }

    fn bars(&mut self, values: &[f64]) {
        let n = values.len();
        let ymax = values.iter().cloned().fold(0.0, f64::max);
        let (ylo, yhi) = Self::y_range(0.0, ymax.max(1e-12));
        let ax = Axis::new(-0.5, n as f64 - 0.5, LEFT + 2, WIDTH - RIGHT - 2, false);
        let ay = Axis::new(ylo, yhi, HEIGHT - BOTTOM - 2, TOP + 2, false);
        let yt = Self::linear_ticks(ylo, yhi, 6);
        self.y_ticks(&ay, &yt, Some(RIGHT));
        let half = ((ax.px(1.0) - ax.px(0.0)) * 0.4).max(0.5);
        for (i, v) in values.iter().enumerate() {
            let cx = ax.px(i as f64);
            self.rect((cx - half).round() as i64, ay.px(0.0).round() as i64, (cx + half).round() as i64, ay.px(*v).round() as i64, BAR);
        }
        let (ticks, step) = nice_ticks(0.0, (n - 1) as f64, 10);
        let step = step.max(1.0);
        let xt: Vec<(f64, String)> = ticks.into_iter().map(|v| (v, format_tick(v, step))).collect();
        self.x_ticks(&ax, &xt);
        self.frame(RIGHT);
    }

    fn heatmap(&mut self, xs: &[f64], ys: &[f64], values: &dyn Fn(usize, usize) -> f64) {
        const BAR_SPACE: usize = 150;
        let mut vmax: f64 = 0.0;
        for i in 0..xs.len() {
            for j in 0..ys.len() {
                let v = values(i, j);
                if v.is_finite() {
                    vmax = vmax.max(v.abs());
                }
            }
        }
        let vmax = if vmax > 0.0 { vmax } else { 1.0 };
        let ax = Axis::new(xs[0], xs[xs.len() - 1], LEFT + 2, WIDTH - BAR_SPACE - 2, false);
        let ay = Axis::new(ys[0], ys[ys.len() - 1], HEIGHT - BOTTOM - 2, TOP + 2, false);
        let nearest = |axis: &[f64], v: f64| -> usize {
            let pos = axis.partition_point(|a| *a < v);
            if pos == 0 {
                0
            } else if pos == axis.len() {
                axis.len() - 1
            } else if v - axis[pos - 1] <= axis[pos] - v {
                pos - 1
            } else {
                pos
            }
        };
        let inv = |a: &Axis, p: f64| a.lo + (p - a.p0) / (a.p1 - a.p0) * (a.hi - a.lo);
        for py in TOP + 2..HEIGHT - BOTTOM - 1 {
            let j = nearest(ys, inv(&ay, py as f64));
            for px in LEFT + 2..WIDTH - BAR_SPACE - 1 {
                let i = nearest(xs, inv(&ax, px as f64));
                let v = values(i, j);
                let c = if v.is_finite() { diverging(v / vmax) } else { GREY };
                self.set(px as i64, py as i64, c);
            }
        }
        let xt = Self::linear_ticks(xs[0], xs[xs.len() - 1], 6);
        self.x_ticks(&ax, &xt);
        let yt = Self::linear_ticks(ys[0], ys[ys.len() - 1], 6);
        self.y_ticks(&ay, &yt, None);
        self.frame(BAR_SPACE);

        // colour bar from −vmax to vmax
        let (bx0, bx1) = ((WIDTH - BAR_SPACE + 20) as i64, (WIDTH - BAR_SPACE + 40) as i64);
        let cb = Axis::new(-vmax, vmax, HEIGHT - BOTTOM - 2, TOP + 2, false);
        for py in TOP + 2..HEIGHT - BOTTOM - 1 {
            let v = inv(&cb, py as f64);
            self.rect(bx0, py as i64, bx1, py as i64, diverging(v / vmax));
        }
        for (v, label) in [(vmax, format!("{vmax:.3}")), (0.0, "0".to_string()), (-vmax, format!("{:.3}", -vmax))] {
            let y = cb.px(v).round() as i64;
            self.rect(bx1, y, bx1 + 5, y + 1, BLACK);
            self.text(&label, bx1 + 12, y - 7);
        }
    }

    fn encode(&self, labels: &Labels<'_>) -> Result<Vec<u8>, PlotError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, WIDTH as u32, HEIGHT as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Balanced);
            let err = |e: png::EncodingError| PlotError::Encode(e.to_string());
            enc.add_itxt_chunk("Title".into(), labels.title.into()).map_err(err)?;
            enc.add_itxt_chunk("X-Label".into(), labels.x.into()).map_err(err)?;
            enc.add_itxt_chunk("Y-Label".into(), labels.y.into()).map_err(err)?;
            let mut w = enc.write_header().map_err(err)?;
            w.write_image_data(&self.px).map_err(err)?;
            w.finish().map_err(err)?;
        }
        Ok(out)
    }
}

/// Short label for a sampled value such as 0.125 or 8.
fn format_short(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Labels<'static> {
        Labels { title: "variance k=1", x: "t", y: "Var(n)" }
    }

    fn decode(bytes: &[u8]) -> (png::OutputInfo, Vec<u8>, Vec<(String, String)>) {
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        let text = reader
            .info()
            .utf8_text
            .iter()
            .map(|c| (c.keyword.clone(), c.get_text().unwrap()))
            .collect();
        (info, buf, text)
    }

    #[test]
    fn series_plot_is_deterministic_and_labelled() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.4).collect();
        let y: Vec<f64> = x.iter().map(|t| 8.25 * (-t / 3.0).exp()).collect();
        let data = PlotData::Series { x: &x, y: &y, err: None };
        let a = emit_plot(&data, PlotKind::VarianceCurve, &labels()).unwrap();
        let b = emit_plot(&data, PlotKind::VarianceCurve, &labels()).unwrap();
        assert_eq!(a, b);
        let (info, _, text) = decode(&a);
        assert_eq!((info.width, info.height), (WIDTH as u32, HEIGHT as u32));
        assert!(text.contains(&("Title".to_string(), "variance k=1".to_string())));
    }

    #[test]
    fn heatmap_is_white_at_zero() {
        let xs = [-1.0, 0.0, 1.0];
        let f = |_i: usize, _j: usize| 0.0;
        let data = PlotData::Grid { x_axis: &xs, y_axis: &xs, values: &f };
        let bytes = emit_plot(&data, PlotKind::WignerHeatmap, &labels()).unwrap();
        let (_, buf, _) = decode(&bytes);
        let (x, y) = (LEFT + 100, TOP + 100);
        let i = (y * WIDTH + x) * 3;
        assert_eq!(&buf[i..i + 3], &WHITE);
    }

    #[test]
    fn diverging_colours_have_opposite_hues() {
        assert_eq!(diverging(0.0), WHITE);
        let (r, b) = (diverging(1.0), diverging(-1.0));
        assert!(r[0] > r[2] && b[2] > b[0]);
    }

    #[test]
    fn mismatched_shape_is_rejected() {
        let v = [0.1, 0.2];
        let data = PlotData::Bars { values: &v };
        assert!(matches!(emit_plot(&data, PlotKind::Ksweep, &labels()), Err(PlotError::Unsupported(..))));
        let x = [1.0, 2.0];
        let data = PlotData::Series { x: &x, y: &v[..1], err: None };
        assert!(emit_plot(&data, PlotKind::VarianceCurve, &labels()).is_err());
    }

    #[test]
    fn log_axis_needs_positive_x() {
        let x = [0.0, 1.0];
        let y = [1.0, 2.0];
        let data = PlotData::Series { x: &x, y: &y, err: None };
        assert!(emit_plot(&data, PlotKind::Ksweep, &labels()).is_err());
    }

    #[test]
    fn ticks() {
        let (t, step) = nice_ticks(0.0, 20.0, 8);
        assert_eq!(step, 5.0);
        assert_eq!(t, vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(format_tick(0.25, 0.05), "0.25");
        assert_eq!(format_tick(-3.0, 1.0), "-3");
        assert_eq!(format_short(0.125), "0.125");
        assert_eq!(format_short(8.0), "8");
    }
}
