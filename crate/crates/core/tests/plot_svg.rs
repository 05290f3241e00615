use turbo_rei::bench::plot::render_convergence_svg;
use turbo_rei::bench::traces::AggregateRow;

fn row(eval_index: usize, mean: f64) -> AggregateRow {
    AggregateRow { eval_index, n: 3, mean, median: mean, q25: mean, q75: mean }
}

fn attr(node: roxmltree::Node, name: &str) -> f64 {
    node.attribute(name).unwrap().parse().unwrap()
}

/// Maps polyline pixels back to data with the frame stored on the plot area.
fn decode(svg: &str) -> Vec<Vec<(f64, f64)>> {
    let doc = roxmltree::Document::parse(svg).unwrap();
    let area = doc.descendants().find(|n| n.attribute("class") == Some("plot-area")).unwrap();
    let (x0, x1, y0, y1) = (attr(area, "data-x-min"), attr(area, "data-x-max"), attr(area, "data-y-min"), attr(area, "data-y-max"));
    let (left, top, w, h) = (attr(area, "data-left"), attr(area, "data-top"), attr(area, "data-width"), attr(area, "data-height"));
    let log = area.attribute("data-log-y") == Some("true");
    doc.descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .map(|n| {
            n.attribute("points")
                .unwrap()
                .split_whitespace()
                .map(|p| {
                    let (px, py) = p.split_once(',').unwrap();
                    let (px, py): (f64, f64) = (px.parse().unwrap(), py.parse().unwrap());
                    let x = x0 + (px - left) / w * (x1 - x0);
                    let y = y1 - (py - top) / h * (y1 - y0);
                    (x, if log { 10f64.powf(y) } else { y })
                })
                .collect()
        })
        .collect()
}

#[test]
fn single_series_two_points() {
    let svg = render_convergence_svg(&[("a".into(), vec![row(1, 3.0), row(2, 1.5)])], false).unwrap();
    let lines = decode(&svg);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0].len(), 2);
    for ((x, y), (ex, ey)) in lines[0].iter().zip([(1.0, 3.0), (2.0, 1.5)]) {
        assert!((x - ex).abs() < 1e-9 && (y - ey).abs() < 1e-9);
    }
}

#[test]
fn inverse_transform_recovers_means() {
    let a: Vec<_> = (1..=40).map(|i| row(i, 10.0 / i as f64)).collect();
    let b: Vec<_> = (1..=25).map(|i| row(i, 5.0 - 0.1 * i as f64)).collect();
    for log_y in [false, true] {
        let svg = render_convergence_svg(&[("a & b".into(), a.clone()), ("c".into(), b.clone())], log_y).unwrap();
        let lines = decode(&svg);
        assert_eq!(lines.len(), 2);
        for (line, rows) in lines.iter().zip([&a, &b]) {
            assert_eq!(line.len(), rows.len());
            for ((x, y), r) in line.iter().zip(rows.iter()) {
                assert!((x - r.eval_index as f64).abs() < 1e-9);
                assert!((y - r.mean).abs() < 1e-9 * r.mean.abs().max(1.0));
            }
        }
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let legend = doc.descendants().filter(|n| n.has_tag_name("text") && n.text() == Some("a & b")).count();
        assert_eq!(legend, 1);
    }
}

#[test]
fn rejects_unplottable_input() {
    assert!(render_convergence_svg(&[], false).is_err());
    assert!(render_convergence_svg(&[("a".into(), vec![row(1, -1.0)])], true).is_err());
    assert!(render_convergence_svg(&[("a".into(), vec![row(1, f64::NAN)])], false).is_err());
}
