//! Clustering kernels: dissimilarities, Ward agglomeration, k-means, fuzzy
//! c-means, and partition types.

mod distance;
mod fcm;
mod kmeans;
mod partition;
mod ward;

pub use distance::{hellinger, hellinger_distance_matrix, squared_euclidean, DistanceMatrix};
pub use fcm::{fcm_from_centers, fcm_objective, fuzzy_cmeans, FcmConfig, FcmResult, FcmRun};
pub use kmeans::{kmeans, kmeans_plus_plus, lloyd, KMeansConfig, KMeansResult, LloydRun, DEFAULT_SEED};
pub use partition::{harden, FuzzyPartition, HardPartition};
pub use ward::{cut_dendrogram, ward_agglomerate, Dendrogram, Merge, WARD_D2};
