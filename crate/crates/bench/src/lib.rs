//! Shared fixtures for the benchmarks.

use riskflow_core::features::{assemble_dataset, category_vocab, AssembleOptions, Dataset};
use riskflow_core::ingest::{bin_crimes, parse_crimes, parse_movements, parse_venues, resolve_movements};
use riskflow_core::ingest::{CellCounts, OdAggregate, Venue};
use riskflow_core::synth::{generate_city, SynthParams, SyntheticCity};
use riskflow_core::{GridSpec, IntervalBounds, MonthId};

pub fn city_params(side: u32, n_venues: usize) -> SynthParams {
    SynthParams { rows: side, cols: side, n_venues, seed: 3, ..Default::default() }
}

pub fn city(side: u32, n_venues: usize) -> SyntheticCity {
    generate_city(&city_params(side, n_venues)).expect("valid synthetic parameters")
}

/// Parsed and binned inputs of a synthetic city.
pub struct Inputs {
    pub grid: GridSpec,
    pub venues: Vec<Venue>,
    pub od: OdAggregate,
    pub cc: CellCounts,
    pub train: Vec<MonthId>,
}

pub fn ingest(city: &SyntheticCity) -> Inputs {
    let venues = parse_venues(city.venues_csv.as_bytes()).unwrap().records;
    let moves = parse_movements(city.movements_csv.as_bytes()).unwrap().records;
    let crimes = parse_crimes(city.crimes_csv.as_bytes(), &city.grid).unwrap().records;
    let (od, _) = resolve_movements(&moves, &venues, &city.grid);
    let cc = bin_crimes(&crimes, &city.grid, &IntervalBounds::default());
    let train = MonthId::range_inclusive("2018-01".parse().unwrap(), "2018-09".parse().unwrap());
    Inputs { grid: city.grid.clone(), venues, od, cc, train }
}

pub fn dataset(inputs: &Inputs) -> Dataset {
    let rt = riskflow_core::risk::build_risk_table(&inputs.cc, &inputs.od, &inputs.train).unwrap();
    let opts = AssembleOptions::new(inputs.train.clone());
    let rows = assemble_dataset(&inputs.cc, &inputs.od, &inputs.venues, &rt, &inputs.grid, &opts).unwrap();
    Dataset::from_rows(&rows, &category_vocab(&inputs.venues)).unwrap()
}
