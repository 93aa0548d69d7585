use std::collections::BTreeSet;

use hcbh_core::device::DeviceConfig;
use hcbh_core::lattice::{enumerate_subsystems, subsystem_area};
use proptest::prelude::*;

fn fixture() -> BTreeSet<Vec<usize>> {
    include_str!("fixtures/device_subsystems.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|x| x.parse::<usize>().unwrap() - 1).collect())
        .collect()
}

#[test]
fn device_coloring_reproduces_the_published_list() {
    let device = DeviceConfig::paper_device();
    let coloring = device.coloring.as_ref().unwrap();
    let subs = enumerate_subsystems(&device.spec, coloring, 6).unwrap();
    assert_eq!(subs.len(), 163);
    let found: BTreeSet<Vec<usize>> = subs.iter().map(|s| s.sites().to_vec()).collect();
    let expected = fixture();
    assert_eq!(expected.len(), 163);
    let missing: Vec<_> = expected.difference(&found).collect();
    let extra: Vec<_> = found.difference(&expected).collect();
    assert!(missing.is_empty() && extra.is_empty(), "missing {missing:?}, extra {extra:?}");

    let per_volume: Vec<usize> = (1..=6).map(|v| subs.iter().filter(|s| s.volume() == v).count()).collect();
    assert_eq!(per_volume, vec![14, 17, 29, 44, 43, 16]);
    // Sorted by volume, then by site list.
    assert!(subs.windows(2).all(|w| (w[0].volume(), w[0].sites()) < (w[1].volume(), w[1].sites())));
}

#[test]
fn area_accounting_holds_for_every_subsystem() {
    let device = DeviceConfig::paper_device();
    let spec = &device.spec;
    for s in enumerate_subsystems(spec, device.coloring.as_ref().unwrap(), 6).unwrap() {
        let members = s.sites();
        let degree: usize = members.iter().map(|&i| spec.neighbors(i).len()).sum();
        let internal = spec.nn_edges().iter().filter(|(a, b)| members.contains(a) && members.contains(b)).count();
        assert_eq!(s.area() + 2 * internal, degree, "{members:?}");
    }
}

proptest! {
    #[test]
    fn complement_has_equal_area(rows in 1usize..5, cols in 2usize..5, mask in any::<u32>()) {
        let spec = hcbh_core::lattice::build_lattice(rows, cols, 1.0, 0.0, None, None).unwrap();
        let n = spec.n_sites();
        let inside: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let outside: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
        prop_assume!(!inside.is_empty() && !outside.is_empty());
        if let (Ok(a), Ok(b)) = (subsystem_area(&spec, &inside), subsystem_area(&spec, &outside)) {
            prop_assert_eq!(a, b);
        }
    }
}
