use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde_json::{json, Map, Value};
use tmtrace_core::cantor::{
    build_tree, dimension_report, node_samples, ratio_bound, required_precision, theoretical_bound, CantorNode,
    CantorTree, DimensionReport, Endpoint, NodeFlag, Side, TreeOptions, REPORT_BITS,
};
use tmtrace_core::germ::{base_germ, closeness_at, verify_constants, Closeness, RegularityReport};
use tmtrace_core::rootfind::{isolate_zeros, working_bits, Enclosure, Minimality, ScanPolicy};
use tmtrace_core::spectrum::{
    approximant_bands, box_dimension, geometric_scales, sigma_points, BoxCountOptions, BoxCounting, BoxDimension,
};
use tmtrace_core::tracepoly::{certified_trace, eval_trace_at, eval_trace_oracle, MAX_ORACLE_DEPTH};
use tmtrace_core::{ModelParams, Real};

use crate::report::{num, opt_num, opt_text, precise, text, Report, Table};
use crate::{Command, Counting, Global, SideArg, Source};

/// Samples per node written by `--emit-plot-data`.
const PLOT_SAMPLES: usize = 65;

pub fn run(global: &Global, command: &Command) -> Result<Report> {
    let mut config = Map::new();
    config.insert("lambda".into(), json!(global.lambda));
    config.insert("precision_bits".into(), json!(global.precision_bits));
    let params = || {
        ModelParams::parse(&global.lambda, global.precision_bits)
            .with_context(|| format!("invalid --lambda {:?}", global.lambda))
    };
    match command {
        Command::Eval { n, x } => eval(params()?, *n, x, config),
        Command::Roots { n, window } => roots(params()?, *n, window, config),
        Command::GermCheck { k, order } => germ_check(params()?, *k, *order, config),
        Command::CantorBuild { big_k, depth, order, side, skip_cascade, emit_plot_data } => {
            let bits = global.precision_bits.max(required_precision(*big_k, *depth));
            config.insert("precision_bits".into(), json!(bits));
            config.insert("precision_bits_requested".into(), json!(global.precision_bits));
            let params = params()?.with_precision(bits);
            let opts = TreeOptions {
                depth: *depth,
                side: side_of(*side),
                certify_order: (!skip_cascade).then_some(*order),
                policy: ScanPolicy::default(),
            };
            cantor_build(params, *big_k, &opts, emit_plot_data.as_deref(), config)
        }
        Command::DimBound { big_k } => dim_bound(*big_k, config),
        Command::ConstantsCheck => constants_check(config),
        Command::Bands { n, window, resolution, emit_plot_data } => {
            bands(params()?, *n, window, *resolution, emit_plot_data.as_deref(), config)
        }
        Command::Sigma { n, window } => sigma(params()?, *n, window, config),
        Command::Boxdim { source, n, window, big_k, depth, counting, scales } => {
            let method = match counting {
                Counting::Mesh => BoxCounting::Mesh,
                Counting::Cover => BoxCounting::MinimalCover,
            };
            config.insert("counting".into(), json!(method_name(method)));
            match source {
                Source::Sigma => {
                    let window = window.as_deref().context("--window is required for sigma points")?;
                    boxdim_sigma(params()?, *n, window, method, *scales, config)
                }
                Source::Tree => boxdim_tree(params()?, *big_k, *depth, method, config),
            }
        }
    }
}

fn side_of(s: SideArg) -> Side {
    match s {
        SideArg::Left => Side::Left,
        SideArg::Right => Side::Right,
    }
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::Left => "left",
        Side::Right => "right",
    }
}

fn method_name(m: BoxCounting) -> &'static str {
    match m {
        BoxCounting::Mesh => "mesh",
        BoxCounting::MinimalCover => "cover",
    }
}

fn parse_real(field: &str, s: &str, bits: usize) -> Result<Real> {
    Real::parse(s.trim(), bits).with_context(|| format!("invalid --{field} {s:?}"))
}

fn parse_window(s: &str, bits: usize) -> Result<(Real, Real)> {
    let Some((lo, hi)) = s.split_once(':') else {
        bail!("invalid --window {s:?}: expected LO:HI");
    };
    let (lo, hi) = (parse_real("window", lo, bits)?, parse_real("window", hi, bits)?);
    ensure!(lo < hi, "invalid --window {s:?}: LO must be below HI");
    Ok((lo, hi))
}

fn minimality_name(m: Minimality) -> &'static str {
    match m {
        Minimality::NotApplicable => "not_applicable",
        Minimality::Heuristic => "heuristic",
        Minimality::Localized => "localized",
    }
}

fn enclosure_json(e: &Enclosure) -> Value {
    json!({
        "certified": e.certified,
        "hi": num(&e.hi),
        "lo": num(&e.lo),
        "midpoint": num(&e.midpoint()),
        "minimality": minimality_name(e.minimality),
        "n": e.n,
        "precision_bits": e.precision_bits,
        "suspect_tangent": e.suspect_tangent,
        "width": num(&e.width()),
    })
}

fn enclosure_header() -> Vec<&'static str> {
    vec!["n", "lo", "hi", "midpoint", "certified", "precision_bits", "minimality", "suspect_tangent"]
}

fn enclosure_row(e: &Enclosure) -> Vec<String> {
    vec![
        e.n.to_string(),
        text(&e.lo),
        text(&e.hi),
        text(&e.midpoint()),
        e.certified.to_string(),
        e.precision_bits.to_string(),
        minimality_name(e.minimality).into(),
        e.suspect_tangent.to_string(),
    ]
}

fn eval(params: ModelParams, n: u32, x: &str, mut config: Map<String, Value>) -> Result<Report> {
    let x = parse_real("x", x, params.precision_bits)?;
    config.insert("n".into(), json!(n));
    config.insert("x".into(), num(&x));
    let (value, bits) = certified_trace(n, &x, &params)?;
    let oracle =
        if n <= MAX_ORACLE_DEPTH { Some(eval_trace_oracle(n, &x, &params.with_precision(bits))?) } else { None };
    let bound = Real::one(64).mul_pow2(-((params.precision_bits / 2) as i64));
    let mut table = Table::new(vec!["n", "x", "value", "precision_bits", "oracle"]);
    table.push(vec![n.to_string(), text(&x), text(&value), bits.to_string(), opt_text(oracle.as_ref())]);
    Ok(Report {
        command: "eval",
        config,
        json: json!({
            "n": n,
            "oracle": opt_num(oracle.as_ref()),
            "relative_error_bound": num(&bound),
            "value": precise(&value),
        }),
        table,
        flags: Vec::new(),
    })
}

fn roots(params: ModelParams, n: u32, window: &str, mut config: Map<String, Value>) -> Result<Report> {
    let (lo, hi) = parse_window(window, params.precision_bits)?;
    config.insert("n".into(), json!(n));
    config.insert("window".into(), json!([num(&lo), num(&hi)]));
    let zeros = isolate_zeros(n, (&lo, &hi), &params, &ScanPolicy::default())?;
    let mut table = Table::new(enclosure_header());
    for z in &zeros {
        table.push(enclosure_row(z));
    }
    let flags = zeros
        .iter()
        .filter(|z| !z.certified)
        .map(|z| format!("zero near {} is not certified", text(&z.midpoint())))
        .collect();
    Ok(Report {
        command: "roots",
        config,
        json: json!({ "count": zeros.len(), "zeros": zeros.iter().map(enclosure_json).collect::<Vec<_>>() }),
        table,
        flags,
    })
}

fn report_json(level: Closeness, r: &RegularityReport) -> Value {
    let cert = r.certificate.as_ref();
    json!({
        "beta": opt_num(cert.map(|c| &c.beta)),
        "delta": opt_num(cert.map(|c| &c.delta)),
        "level": level.as_str(),
        "low_orders_vanish": r.low_orders_vanish,
        "margin": num(&r.margin),
        "order_checked": cert.map(|c| c.order_checked),
        "passed": r.passed,
        "tail_ratio": cert.and_then(|c| c.tail_ratio),
        "worst": { "jet": if r.worst.0 == 0 { "delta_prev" } else { "delta" }, "order": r.worst.1 },
    })
}

fn germ_check(params: ModelParams, k: u32, order: usize, mut config: Map<String, Value>) -> Result<Report> {
    ensure!(order >= 3, "invalid --order {order}: must be at least 3");
    config.insert("k".into(), json!(k));
    config.insert("order".into(), json!(order));
    let germ = base_germ(&params);
    let (level, report) = closeness_at(&germ, k as i64, order, &params)?;
    let pair = (germ.index(k as i64 - 1)?, germ.index(k as i64)?);
    let mut body = report_json(level, &report);
    let extra = body.as_object_mut().expect("object");
    extra.insert("k".into(), json!(k));
    extra.insert("pair".into(), json!([pair.0, pair.1]));
    extra.insert("rho".into(), num(&germ.scale(k as i64)));
    extra.insert("x0".into(), num(&germ.x0));
    let mut table = Table::new(vec!["k", "pair_prev", "pair", "level", "margin", "low_orders_vanish", "order"]);
    table.push(vec![
        k.to_string(),
        pair.0.to_string(),
        pair.1.to_string(),
        level.as_str().into(),
        text(&report.margin),
        report.low_orders_vanish.to_string(),
        order.to_string(),
    ]);
    let flags = if level == Closeness::None {
        vec![format!("pair (h_{}, h_{}) passes no closeness level", pair.0, pair.1)]
    } else {
        Vec::new()
    };
    Ok(Report { command: "germ-check", config, json: body, table, flags })
}

fn flag_text(f: &NodeFlag) -> String {
    match f {
        NodeFlag::RatioBelowBound { child } => format!("ratio of child {child} below 2.1^-K"),
        NodeFlag::GapNotPositive => "gap between children not positive".into(),
        NodeFlag::SplitFailed(e) => format!("split failed: {e}"),
        NodeFlag::CascadeFailed { endpoint, level } => {
            format!("endpoint {} reached only {} closeness", if *endpoint == 0 { "a" } else { "b" }, level.as_str())
        }
        NodeFlag::EndpointUnverified { endpoint } => {
            format!("endpoint {} did not verify at doubled precision", if *endpoint == 0 { "a" } else { "b" })
        }
    }
}

fn endpoint_json(e: &Endpoint) -> Value {
    json!({
        "enclosure": enclosure_json(&e.enclosure),
        "germ": { "pair": [e.germ.pair.0, e.germ.pair.1], "rho": num(&e.germ.rho), "x0": num(&e.germ.x0) },
        "x": num(&e.point()),
    })
}

fn node_json(tree: &CantorTree, i: usize) -> Value {
    let node = &tree.nodes[i];
    let cascade = node.cascade.as_ref().map(|c| {
        json!({
            "index": c.index,
            "levels": [c.levels[0].as_str(), c.levels[1].as_str()],
            "margins": [num(&c.reports[0].margin), num(&c.reports[1].margin)],
        })
    });
    let children = node.children.map(|(l, r)| json!([node_json(tree, l), node_json(tree, r)]));
    json!({
        "a": endpoint_json(&node.a),
        "b": endpoint_json(&node.b),
        "cascade": cascade,
        "children": children,
        "flags": node.flags.iter().map(flag_text).collect::<Vec<_>>(),
        "gap": opt_num(node.gap.as_ref()),
        "gen": node.gen,
        "left_ratio": opt_num(node.left_ratio.as_ref()),
        "length": num(&node.length()),
        "poly_index": node.poly_index,
        "right_ratio": opt_num(node.right_ratio.as_ref()),
        "word": node.word,
    })
}

fn display_word(w: &str) -> &str {
    if w.is_empty() {
        "(root)"
    } else {
        w
    }
}

fn dimension_json(d: &DimensionReport) -> Value {
    json!({
        "all_ratios_pass": d.all_ratios_pass,
        "empirical_bound": opt_num(d.empirical_bound.as_ref()),
        "exploratory": d.exploratory,
        "gaps_positive": d.gaps_positive,
        "min_ratio": num(&d.min_ratio),
        "theoretical_bound": num(&d.theoretical_bound),
    })
}

fn cascade_text(node: &CantorNode, i: usize) -> String {
    node.cascade.as_ref().map(|c| c.levels[i].as_str().to_string()).unwrap_or_default()
}

fn write_plot_data(path: &Path, rows: impl IntoIterator<Item = Vec<String>>, header: &[&str]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.write_record(&r).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cantor_build(
    params: ModelParams,
    k: u32,
    opts: &TreeOptions,
    plot: Option<&Path>,
    mut config: Map<String, Value>,
) -> Result<Report> {
    config.insert("K".into(), json!(k));
    config.insert("depth".into(), json!(opts.depth));
    config.insert("order".into(), json!(opts.certify_order));
    config.insert("side".into(), json!(side_name(opts.side)));
    let tree = build_tree(&params, k, opts)?;
    let dimension = if tree.depth > 0 { Some(dimension_report(&tree)?) } else { None };
    let mut flags = Vec::new();
    let mut table = Table::new(vec![
        "word",
        "gen",
        "a",
        "b",
        "width",
        "left_ratio",
        "right_ratio",
        "gap",
        "cascade_a",
        "cascade_b",
        "flags",
    ]);
    for node in &tree.nodes {
        for f in &node.flags {
            flags.push(format!("node {}: {}", display_word(&node.word), flag_text(f)));
        }
        table.push(vec![
            node.word.clone(),
            node.gen.to_string(),
            text(&node.a.point()),
            text(&node.b.point()),
            text(&node.length()),
            opt_text(node.left_ratio.as_ref()),
            opt_text(node.right_ratio.as_ref()),
            opt_text(node.gap.as_ref()),
            cascade_text(node, 0),
            cascade_text(node, 1),
            node.flags.iter().map(flag_text).collect::<Vec<_>>().join("; "),
        ]);
    }
    if let Some(path) = plot {
        let mut rows = Vec::new();
        for node in &tree.nodes {
            for (x, y) in node_samples(node, &params, PLOT_SAMPLES)? {
                rows.push(vec![node.word.clone(), node.poly_index.to_string(), text(&x), text(&y)]);
            }
        }
        write_plot_data(path, rows, &["word", "m", "x", "h"])?;
    }
    let root_closeness = tree.root_closeness.as_ref().map(|(l, r)| report_json(*l, r));
    let body = json!({
        "K": tree.k,
        "depth": tree.depth,
        "dimension": dimension.as_ref().map(dimension_json),
        "exploratory": tree.exploratory,
        "node_count": tree.nodes.len(),
        "ratio_bound": num(&ratio_bound(k, REPORT_BITS)),
        "root_closeness": root_closeness,
        "side": side_name(tree.side),
        "tree": node_json(&tree, 0),
    });
    Ok(Report { command: "cantor-build", config, json: body, table, flags })
}

fn dim_bound(k: u32, mut config: Map<String, Value>) -> Result<Report> {
    ensure!(k > 0, "invalid --K 0");
    config.insert("K".into(), json!(k));
    let bound = theoretical_bound(k, REPORT_BITS);
    let formula = "ln2/(K ln 2.1)";
    let mut table = Table::new(vec!["K", "formula", "bound"]);
    table.push(vec![k.to_string(), formula.into(), text(&bound)]);
    Ok(Report {
        command: "dim-bound",
        config,
        json: json!({
            "K": k,
            "bound": precise(&bound),
            "formula": formula,
            "ratio_bound": num(&ratio_bound(k, REPORT_BITS)),
        }),
        table,
        flags: Vec::new(),
    })
}

fn constants_check(mut config: Map<String, Value>) -> Result<Report> {
    config.remove("lambda");
    config.remove("precision_bits");
    let ledger = verify_constants();
    let mut table = Table::new(vec!["inequality", "lhs", "rhs", "strict", "holds"]);
    let mut checks = Vec::new();
    let mut flags = Vec::new();
    for c in &ledger.checks {
        table.push(vec![
            c.name.into(),
            c.lhs.to_string(),
            c.rhs.to_string(),
            c.strict.to_string(),
            c.holds.to_string(),
        ]);
        checks.push(json!({
            "holds": c.holds,
            "inequality": c.name,
            "lhs": c.lhs.to_string(),
            "rhs": c.rhs.to_string(),
            "strict": c.strict,
        }));
        if !c.holds {
            flags.push(format!("{} fails: {} vs {}", c.name, c.lhs, c.rhs));
        }
    }
    Ok(Report {
        command: "constants-check",
        config,
        json: json!({
            "K": ledger.k,
            "all_hold": ledger.all_hold(),
            "checks": checks,
            "delta0": ledger.delta0.to_string(),
            "delta1": ledger.delta1.to_string(),
            "delta2": ledger.delta2.to_string(),
        }),
        table,
        flags,
    })
}

fn bands(
    params: ModelParams,
    n: u32,
    window: &str,
    resolution: usize,
    plot: Option<&Path>,
    mut config: Map<String, Value>,
) -> Result<Report> {
    let (lo, hi) = parse_window(window, params.precision_bits)?;
    config.insert("n".into(), json!(n));
    config.insert("resolution".into(), json!(resolution));
    config.insert("window".into(), json!([num(&lo), num(&hi)]));
    let bands = approximant_bands(n, (&lo, &hi), &params, resolution)?;
    let mut table = Table::new(vec!["n", "lo", "hi", "tangencies", "clipped_lo", "clipped_hi", "widened"]);
    let mut list = Vec::new();
    for b in &bands {
        let tangencies: Vec<String> = b.tangencies.iter().map(text).collect();
        table.push(vec![
            n.to_string(),
            text(&b.lo),
            text(&b.hi),
            tangencies.join(" "),
            b.clipped_lo.to_string(),
            b.clipped_hi.to_string(),
            b.widened.to_string(),
        ]);
        list.push(json!({
            "clipped_hi": b.clipped_hi,
            "clipped_lo": b.clipped_lo,
            "hi": num(&b.hi),
            "lo": num(&b.lo),
            "tangencies": tangencies,
            "widened": b.widened,
        }));
    }
    if let Some(path) = plot {
        let bits = working_bits(n, &params);
        let (a, span) = (lo.with_precision(bits), &hi.with_precision(bits) - &lo.with_precision(bits));
        let denom = Real::from_i64(resolution as i64, bits);
        let mut rows = Vec::with_capacity(resolution + 1);
        for i in 0..=resolution {
            let x = &a + &(&(&span * &Real::from_i64(i as i64, bits)) / &denom);
            let y = eval_trace_at(n, &x, &params, bits)?;
            rows.push(vec![n.to_string(), text(&x), text(&y)]);
        }
        write_plot_data(path, rows, &["n", "x", "h"])?;
    }
    let flags = bands
        .iter()
        .filter(|b| b.widened)
        .map(|b| format!("band [{}, {}] has an unresolved edge", text(&b.lo), text(&b.hi)))
        .collect();
    Ok(Report { command: "bands", config, json: json!({ "bands": list, "count": bands.len(), "n": n }), table, flags })
}

fn sigma(params: ModelParams, n: u32, window: &str, mut config: Map<String, Value>) -> Result<Report> {
    let (lo, hi) = parse_window(window, params.precision_bits)?;
    config.insert("n".into(), json!(n));
    config.insert("window".into(), json!([num(&lo), num(&hi)]));
    let sample = sigma_points(n, (&lo, &hi), &params, &ScanPolicy::default())?;
    let mut table = Table::new(vec!["midpoint", "lo", "hi", "levels", "certified"]);
    let mut points = Vec::new();
    for p in &sample.points {
        let levels: Vec<String> = p.levels.iter().map(u32::to_string).collect();
        table.push(vec![
            text(&p.enclosure.midpoint()),
            text(&p.enclosure.lo),
            text(&p.enclosure.hi),
            levels.join(" "),
            p.enclosure.certified.to_string(),
        ]);
        points.push(json!({
            "certified": p.enclosure.certified,
            "hi": num(&p.enclosure.hi),
            "levels": p.levels,
            "lo": num(&p.enclosure.lo),
            "midpoint": num(&p.enclosure.midpoint()),
        }));
    }
    Ok(Report {
        command: "sigma",
        config,
        json: json!({ "count": points.len(), "n_max": n, "points": points }),
        table,
        flags: Vec::new(),
    })
}

fn boxdim_json(d: &BoxDimension) -> Value {
    json!({
        "counts": d.counts.iter().map(|(e, c)| json!({ "count": c, "scale": num(e) })).collect::<Vec<_>>(),
        "intercept": d.intercept,
        "offset_slope": d.offset_slope,
        "residual": d.residual,
        "slope": d.slope,
    })
}

fn boxdim_table(d: &BoxDimension) -> Table {
    let mut table = Table::new(vec!["scale", "count", "slope", "offset_slope"]);
    for (e, c) in &d.counts {
        table.push(vec![text(e), c.to_string(), d.slope.to_string(), d.offset_slope.to_string()]);
    }
    table
}

fn boxdim_sigma(
    params: ModelParams,
    n: u32,
    window: &str,
    method: BoxCounting,
    scales: usize,
    mut config: Map<String, Value>,
) -> Result<Report> {
    let (lo, hi) = parse_window(window, params.precision_bits)?;
    config.insert("n".into(), json!(n));
    config.insert("scales".into(), json!(scales));
    config.insert("source".into(), json!("sigma"));
    config.insert("window".into(), json!([num(&lo), num(&hi)]));
    let sample = sigma_points(n, (&lo, &hi), &params, &ScanPolicy::default())?;
    let top = (&hi - &lo).mul_pow2(-3);
    let bottom = &top / &Real::from_i64(1000, params.precision_bits);
    let eps = geometric_scales(&top, &bottom, scales);
    let opts = BoxCountOptions { origin: Some(lo.clone()), method, ..Default::default() };
    let d = box_dimension(&sample.midpoints(), &eps, &opts)?;
    let mut body = boxdim_json(&d);
    body.as_object_mut().expect("object").insert("points".into(), json!(sample.points.len()));
    Ok(Report { command: "boxdim", config, json: body, table: boxdim_table(&d), flags: Vec::new() })
}

fn boxdim_tree(
    params: ModelParams,
    k: u32,
    depth: u32,
    method: BoxCounting,
    mut config: Map<String, Value>,
) -> Result<Report> {
    let bits = params.precision_bits.max(required_precision(k, depth));
    let params = params.with_precision(bits);
    config.insert("K".into(), json!(k));
    config.insert("depth".into(), json!(depth));
    config.insert("precision_bits".into(), json!(bits));
    config.insert("source".into(), json!("tree"));
    let tree = build_tree(&params, k, &TreeOptions { depth, ..Default::default() })?;
    let points = tree.endpoints();
    let root = tree.root();
    let opts = BoxCountOptions { min_points: points.len(), origin: Some(root.a.point()), method };
    let d = box_dimension(&points, &tree.generation_scales(), &opts)?;
    let report = dimension_report(&tree)?;
    let mut body = boxdim_json(&d);
    let extra = body.as_object_mut().expect("object");
    extra.insert("empirical_bound".into(), opt_num(report.empirical_bound.as_ref()));
    extra.insert("points".into(), json!(points.len()));
    let flags = tree
        .flagged()
        .flat_map(|n| n.flags.iter().map(move |f| format!("node {}: {}", display_word(&n.word), flag_text(f))))
        .collect();
    Ok(Report { command: "boxdim", config, json: body, table: boxdim_table(&d), flags })
}
