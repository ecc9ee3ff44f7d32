//! Instance generation and experiment orchestration: synthetic hotel
//! seasons, reservation-log ingestion, and CSV reports of revenue as a
//! fraction of the hindsight bound.

mod experiment;
mod hotel;
mod transactions;

pub use experiment::{
    hotel_policies, lp_bound, run_experiment, trial_seed, ExperimentConfig, ExperimentReport, InstanceSource,
    ReportRow, RunFailure, SCHEMA_HEADER,
};
pub use hotel::{
    build_ensemble, empirical_shares, generate_days, generate_hotel_ensemble, hotel_inventories, hotel_model,
    hotel_prices, HotelDay, HotelEnsemble, HotelProfile, DEFAULT_LOADING_FACTORS, FARE_DIFF_NO_PURCHASE_SHIFT,
    ROOM_CATEGORIES,
};
pub use transactions::{ingest_transactions, read_transactions, TransactionRecord};
