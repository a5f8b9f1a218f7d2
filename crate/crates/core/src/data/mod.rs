//! Observed data: tensors, masks, coupled collections and preprocessing.

mod collection;
mod preprocess;
mod tensor;

pub use collection::{validate_collection, Collection, View, Violation};
pub use preprocess::{center_and_normalize, PreprocessTransform, ScaleMode};
pub use tensor::{restack_matrices, unfold_to_matrices, MaskedTensor3, Tensor3};
