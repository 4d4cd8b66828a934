pub mod graph;
pub mod report;
pub mod similarity;

pub use graph::{
    apd, characteristic_path_length, density, global_efficiency, graph_properties, modularity, modularity_of,
    GraphProperties, Partition, PathLength,
};
pub use report::{evaluate_dataset, evaluate_pairs, Direction, EvalReport, SubjectRow, ThresholdConfig};
pub use similarity::{matrix_similarity, similarity_metrics, SimilarityMetrics};
