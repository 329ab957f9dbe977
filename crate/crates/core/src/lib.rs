//! Discrete Monge-Kantorovich (L² Wasserstein) distance between grayscale
//! images, and the nearest-neighbour digit classification harness built on it.
//!
//! The pipeline is:
//!
//! 1. [`mnist`] reads IDX files and draws the disjoint training sets and the
//!    test set used for the accuracy study.
//! 2. [`measures`] turns an image into a sum of weighted point masses on the
//!    pixel grid.
//! 3. [`transport`] solves the balanced transportation problem between two
//!    measures with a transportation simplex, returning the plan, its cost and
//!    a dual certificate.
//! 4. [`distances`] exposes Euclidean, one-sided tangent and transport
//!    distances behind one interface; [`knn`] classifies with any of them.
//! 5. [`experiment`] runs the accuracy-versus-training-size study and writes
//!    the CSV/text outputs.
//!
//! ```
//! use kantorovich::measures::{measure_from_image, BalancedPair};
//! use kantorovich::transport::{solve_transport, SolverOptions};
//! use kantorovich::GrayImage;
//!
//! // Three unit masses moved by (+2, +1): each costs 2² + 1² = 5.
//! let mut bakers = GrayImage::zeros(8, 8);
//! let mut cafes = GrayImage::zeros(8, 8);
//! for (x, y) in [(3, 2), (1, 5), (4, 4)] {
//!     bakers.set(x, y, 1.0);
//!     cafes.set(x + 2, y + 1, 1.0);
//! }
//! let a = measure_from_image(&bakers, 0.0).unwrap();
//! let b = measure_from_image(&cafes, 0.0).unwrap();
//! let pair = BalancedPair::new(a, b).unwrap();
//! let plan = solve_transport(&pair, &SolverOptions::default()).unwrap();
//! assert!((plan.objective - 15.0).abs() < 1e-9);
//! ```

pub mod distances;
mod error;
pub mod experiment;
mod image;
pub mod knn;
pub mod measures;
pub mod mnist;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use image::GrayImage;
