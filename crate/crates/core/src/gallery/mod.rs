//! Named state families and the numbers derived from them.

pub mod count;
pub mod defect;
pub mod domain;
pub mod toric;

pub use count::{enumeration_histogram, gf2_count, CountReport};
pub use defect::{concat_defect_state, localized_defect_pair, DefectBlock, DefectPair, DefectState};
pub use domain::{
    additivity, concat_state, domain_pair_count, ghz_domain_state, localized_pair, AdditivityReport, ConcatBlock,
    LocalPair,
};
pub use toric::{
    check_regions, phi_energy_bound, phi_energy_bound_square, phi_energy_bound_strip, region_separation,
    square_regions, strip_regions, toric_phi, RegionSpec,
};
