//! Consumers of feature vectors: a one-vs-rest squared-hinge linear SVM,
//! the discriminator-activation baseline, class distance matrices and
//! nearest-neighbour retrieval.

mod distances;
mod features;
mod svm;

pub use distances::{class_distance_matrix, group_by_label, knn_query, ClassDistanceMatrix};
pub use features::{dpool_features, Standardizer};
pub use svm::{accuracy, l2svm_predict, l2svm_train, LinearSvmModel, SvmParams};

use crate::error::Result;

/// Standardizes with training statistics, trains, and returns the
/// accuracy on the test split.
pub fn svm_accuracy(
    train: &[Vec<f64>],
    train_labels: &[u32],
    test: &[Vec<f64>],
    test_labels: &[u32],
    params: &SvmParams,
) -> Result<f64> {
    let s = Standardizer::fit(train)?;
    let model = l2svm_train(&s.apply_all(train)?, train_labels, params)?;
    let predicted = l2svm_predict(&model, &s.apply_all(test)?)?;
    accuracy(&predicted, test_labels)
}
