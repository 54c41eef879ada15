use std::collections::HashMap;

use riskflow_core::geo::{CellId, GridSpec, IntervalBounds, MonthId, TimeInterval};
use riskflow_core::ingest::{bin_crimes, parse_crimes, parse_movements, parse_venues, resolve_movements, OdAggregate};
use riskflow_core::synth::{generate_city, SynthParams, SyntheticCity};

type Bucket = (CellId, MonthId, TimeInterval);

fn ingest(city: &SyntheticCity) -> (OdAggregate, riskflow_core::CellCounts) {
    let venues = parse_venues(city.venues_csv.as_bytes()).unwrap().records;
    let moves = parse_movements(city.movements_csv.as_bytes()).unwrap().records;
    let crimes = parse_crimes(city.crimes_csv.as_bytes(), &city.grid).unwrap().records;
    let (od, _) = resolve_movements(&moves, &venues, &city.grid);
    (od, bin_crimes(&crimes, &city.grid, &IntervalBounds::default()))
}

/// Arrivals and arrival-weighted mean origin risk per bucket, read back from
/// the generated movement file.
fn inflow(od: &OdAggregate, grid: &GridSpec, rho: &[f64]) -> HashMap<Bucket, (u64, f64)> {
    let mut acc: HashMap<Bucket, (u64, f64)> = HashMap::new();
    for (k, w) in od.iter() {
        let e = acc.entry((k.dest, k.month, k.interval)).or_default();
        e.0 += w;
        e.1 += w as f64 * rho[k.origin.linear(grid)];
    }
    acc.values_mut().for_each(|e| e.1 /= e.0 as f64);
    acc
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn no_gain_decouples_crimes_from_movement() {
    let p = SynthParams { rows: 10, cols: 10, n_venues: 200, risk_gain: 0.0, seed: 3, ..Default::default() };
    let city = generate_city(&p).unwrap();
    let (od, cc) = ingest(&city);
    let flows = inflow(&od, &city.grid, &city.rho);
    let (a, c): (Vec<f64>, Vec<f64>) =
        flows.iter().map(|(&(v, m, t), &(arr, _))| (arr as f64, cc.get(v, m, t) as f64)).unzip();
    assert!(a.len() >= 1000);
    let r = pearson(&a, &c);
    assert!(r.abs() < 0.1, "correlation {r}");
}

#[test]
fn high_risk_origins_feed_more_crime() {
    let p = SynthParams {
        rows: 10,
        cols: 10,
        n_venues: 200,
        base_rate: 0.02,
        risk_gain: 1.0,
        seed: 4,
        ..Default::default()
    };
    let city = generate_city(&p).unwrap();
    let (od, cc) = ingest(&city);
    let mut rows: Vec<(f64, u64)> =
        inflow(&od, &city.grid, &city.rho).iter().map(|(&(v, m, t), &(_, r))| (r, cc.get(v, m, t))).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tenth = rows.len() / 10;
    let mean = |s: &[(f64, u64)]| s.iter().map(|r| r.1 as f64).sum::<f64>() / s.len() as f64;
    let (low, high) = (mean(&rows[..tenth]), mean(&rows[rows.len() - tenth..]));
    assert!(high > low, "top decile {high} vs bottom decile {low}");
}

#[test]
fn default_city_is_driven_by_risk_inflow() {
    let p = SynthParams::default();
    let city = generate_city(&p).unwrap();
    let share = city.inflow_variance_share(p.risk_gain);
    assert!(share >= 0.5, "risk inflow explains {share} of the crime variance");
    assert_eq!(city.grid.n_cells(), 400);
    assert_eq!(city.venues_csv.lines().count(), 801);
}

#[test]
fn totals_grow_with_scale_and_base_rate() {
    let base = SynthParams {
        rows: 8,
        cols: 8,
        n_venues: 120,
        months: MonthId::range_inclusive("2018-01".parse().unwrap(), "2018-02".parse().unwrap()),
        seed: 8,
        ..Default::default()
    };
    let mut prev: Option<SyntheticCity> = None;
    for scale in [1, 2, 5] {
        let city = generate_city(&SynthParams { movement_scale: scale, ..base.clone() }).unwrap();
        if let Some(p) = &prev {
            assert!(city.total_movement() >= p.total_movement());
            for (a, b) in p.latent.iter().zip(&city.latent) {
                assert!(b.arrivals >= a.arrivals);
            }
        }
        prev = Some(city);
    }
    let mut prev: Option<SyntheticCity> = None;
    for rate in [0.5, 1.0, 4.0] {
        let city = generate_city(&SynthParams { base_rate: rate, ..base.clone() }).unwrap();
        if let Some(p) = &prev {
            assert!(city.total_crimes() >= p.total_crimes());
            for (a, b) in p.latent.iter().zip(&city.latent) {
                assert!(b.crimes >= a.crimes);
            }
        }
        prev = Some(city);
    }
}
