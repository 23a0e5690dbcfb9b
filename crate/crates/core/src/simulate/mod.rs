//! Synthetic data with planted interactions, typed-user simulation and
//! recommendation-list metrics.

mod lists;
mod synthetic;

pub use lists::{
    ab_report, click_log, coverage_at, ctr, cvr, generate_users, inter_list_distance, personalization_at,
    popularity_at, recommend, recommend_with, write_ab_csv, AbReport, AbRow, App, Catalog, ClickModel, ClickSim,
    Popularity, RecommendationList, User, UserAppEncoder, UserGroupSet,
};
pub use synthetic::{
    generate_synthetic, to_raw_lines, FeaturePair, FieldPair, FieldTriple, SyntheticData, SyntheticSpec, Truth,
};
