//! Construction of a consolidated box-annotated video dataset: pseudo clips
//! from still images, category merging across source taxonomies, weighted
//! source sampling, annotation-cost estimates and manifest I/O.

pub mod augment;
pub mod cost;
pub mod manifest;
pub mod sampling;
pub mod taxonomy;

pub use augment::{augment_image_to_clip, AugSpec, FrameTransform, ImageBox};
pub use cost::{annotation_cost, AnnotationCost};
pub use manifest::{Annotation, Category, DatasetManifest, Item, Source, SourceKind};
pub use sampling::{weighted_sample, Draw};
pub use taxonomy::{merge_category_maps, CategoryMergeRule, MergedTaxonomy, Taxonomy, TaxonomyRole};
