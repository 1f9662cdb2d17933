//! Minimal SVG step plot of a data profile.

use super::profile::DataProfile;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

pub fn profile_svg(p: &DataProfile) -> String {
    let bmax = p.budgets.last().copied().unwrap_or(1.0).max(1.0);
    let sx = |b: f64| PAD + b / bmax * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - v * (H - 2.0 * PAD);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n");
    s.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n<path d=\"M{PAD} {} H{} M{PAD} {} V{PAD}\" stroke=\"black\"/>\n",
        H - PAD,
        W - PAD,
        H - PAD
    ));
    s.push_str(&format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">budget units (d+2 evaluations), tau = {}</text>\n", W / 2.0, H - 15.0, p.tau));
    s.push_str(&format!("<text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\">fraction solved</text>\n", H / 2.0, H / 2.0));
    for (i, (solver, curve)) in p.curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (j, (&b, &v)) in p.budgets.iter().zip(curve).enumerate() {
            if j == 0 {
                d.push_str(&format!("M{:.2} {:.2}", sx(b), sy(v)));
            } else {
                d.push_str(&format!(" H{:.2} V{:.2}", sx(b), sy(v)));
            }
        }
        s.push_str(&format!(
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n"
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{solver}</text>\n",
            W - PAD - 120.0,
            PAD + 16.0 * i as f64
        ));
    }
    s.push_str("</svg>\n");
    s
}
