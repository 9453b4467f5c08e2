//! Scenario files shipped with the crate.

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($name:literal, $summary:literal) => {
        Preset { name: $name, summary: $summary, text: include_str!(concat!("../presets/", $name, ".toml")) }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("fig1", "ring potential and lowest 20 energy levels"),
    preset!("fig2", "energy and entropy from the first 20 eigenstates under two-photon loss"),
    preset!("fig3b", "steady state from coherent(0) under single-photon loss"),
    preset!("fig3c", "steady state and trajectory from coherent(0) under two-photon loss"),
    preset!("fig4", "cattiness of the cooling runs against the two-photon steady state"),
    preset!("fig5", "steady states from eigenstates 0 and 1 under two-photon loss"),
    preset!("fig6a", "ground state under weak single-photon loss"),
    preset!("fig6b", "ground state under two-photon loss"),
    preset!("fig6c", "ground state under weak single-photon plus two-photon loss"),
    preset!("supp_purrcat_a", "signal mode, two-photon loss plus weak dephasing"),
    preset!("supp_purrcat_b", "signal mode, weak two-photon loss plus strong dephasing"),
    preset!("supp_purrcat_ring_a", "ring, two-photon loss plus weak dephasing"),
    preset!("supp_purrcat_ring_b", "ring, weak two-photon loss plus strong dephasing"),
    preset!("coupler_validation", "two-mode coupler against the effective signal model"),
];

pub fn get(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
