use std::collections::HashSet;

use csma_core::analytics::{ser_data_width, ser_shared};
use csma_core::mapping::{
    build_address_bit_plan, build_lookup_plan, build_qos_plan, format_lookup_table,
    parse_lookup_table, AddressBitLayout, AllocationPlan, Demapped, LookupRow,
};
use proptest::prelude::*;

/// Every codeword demaps to its (user, word), codeword sets are disjoint and
/// the remaining labels are unallocated.
fn check_plan(plan: &AllocationPlan) {
    let mut seen = HashSet::new();
    for u in plan.users() {
        assert_eq!(u.codewords().len(), 1 << u.data_bits());
        for (word, &cw) in u.codewords().iter().enumerate() {
            assert!(seen.insert(cw), "label {cw} allocated twice");
            assert_eq!(plan.map_symbol(u.user_id(), word as u32).unwrap(), cw);
            assert_eq!(
                plan.demap_symbol(cw),
                Demapped::User {
                    user_id: u.user_id(),
                    data_word: word as u32
                }
            );
        }
    }
    assert_eq!(seen.len(), plan.allocated_labels());
    for label in 0..plan.order() {
        if !seen.contains(&label) {
            assert_eq!(plan.demap_symbol(label), Demapped::Unallocated);
        }
    }
}

#[test]
fn every_address_layout_up_to_1024() {
    for d in (2..=10u32).step_by(2) {
        let order = 1 << d;
        for mask in 1u32..(1 << d) - 1 {
            let positions: Vec<u32> = (0..d).filter(|p| mask >> p & 1 == 1).collect();
            let layout = AddressBitLayout::new(order, &positions).unwrap();
            for label in 0..order {
                assert_eq!(
                    layout.compose(layout.address_of(label), layout.data_of(label)),
                    label
                );
            }
            let plan = build_address_bit_plan(&layout).unwrap();
            assert_eq!(plan.allocated_labels(), order as usize);
            check_plan(&plan);
        }
    }
}

#[test]
fn qos_plans_up_to_1024() {
    for (order, bits) in [
        (16u32, vec![3u32, 2, 2]),
        (16, vec![2, 2, 2, 2]),
        (64, vec![5, 4, 3, 2, 1]),
        (256, vec![7, 6, 6]),
        (1024, vec![8, 8, 8, 7, 6, 1, 1]),
    ] {
        let plan = build_qos_plan(order, &bits).unwrap();
        check_plan(&plan);
    }
    assert!(build_qos_plan(16, &[3, 3, 1]).is_err());
}

fn lookup_case() -> impl Strategy<Value = (u32, Vec<u32>, Vec<u32>)> {
    prop_oneof![Just(16u32), Just(64), Just(256)].prop_flat_map(|order| {
        let d = order.trailing_zeros();
        let widths = prop::collection::vec(1..d, 1..6).prop_filter("fits", move |w| {
            w.iter().map(|b| 1u32 << b).sum::<u32>() <= order
        });
        let labels = Just((0..order).collect::<Vec<u32>>()).prop_shuffle();
        (Just(order), widths, labels)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_lookup_tables((order, widths, labels) in lookup_case()) {
        let mut rows = Vec::new();
        let mut next = labels.iter();
        for (i, &b) in widths.iter().enumerate() {
            for word in 0..1u32 << b {
                rows.push(LookupRow {
                    user_id: 10 + i as u32,
                    data_word: word,
                    data_bits: b,
                    codeword: *next.next().unwrap(),
                });
            }
        }
        // table order must not matter
        rows.reverse();
        let plan = build_lookup_plan(order, &rows).unwrap();
        check_plan(&plan);
        let reparsed = parse_lookup_table(&format_lookup_table(&plan)).unwrap();
        prop_assert_eq!(build_lookup_plan(order, &reparsed).unwrap(), plan);

        if let Some(dup) = rows.iter().skip(1).find(|r| r.user_id != rows[0].user_id) {
            let mut bad = rows.clone();
            bad[0].codeword = dup.codeword;
            prop_assert!(build_lookup_plan(order, &bad).is_err());
        }
    }

    #[test]
    fn shared_ser_never_below_dedicated(snr_db in -10.0f64..40.0, b in 1u32..6, a in 1u32..6) {
        let (b, a) = (2 * b, 2 * a);
        prop_assume!(a + b <= 12);
        let snr = 10f64.powf(snr_db / 10.0);
        prop_assert!(ser_shared(b, a, snr).unwrap() >= ser_data_width(b, snr).unwrap());
    }
}
