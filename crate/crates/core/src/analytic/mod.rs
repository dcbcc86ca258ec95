//! Closed-form expectations, covariances and bounds.

pub mod asymptotics;
pub mod bounds;
pub mod covariances;
pub mod moments;
pub mod observables;
pub mod second_order;
pub mod taylor;

pub use asymptotics::{regime_asymptotics, RegimeAsymptotics};
pub use bounds::{estimator_bound, variance_bounds, VarianceBounds};
pub use covariances::{covariances, Covariances};
pub use moments::{moments, MomentSet};
pub use observables::{exact_observables, ExactObservables, FunctionalMoments};
pub use second_order::SecondOrder;
pub use taylor::taylor_remainder;
