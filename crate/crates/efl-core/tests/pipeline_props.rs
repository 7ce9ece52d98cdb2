mod common;

use common::mixed_hypergraph;
use efl_core::hypercore::{verify_coloring, Hierarchy};
use efl_core::pipeline::{efl_color, stability_color, sublinear_color};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn efl_color_is_proper_and_ledger_exact(h in mixed_hypergraph(8, 120), seed in any::<u64>()) {
        let hier = Hierarchy::default();
        let (col, rep) = efl_color(&h, &hier, seed);
        prop_assert!(verify_coloring(&h, &col).is_ok());
        prop_assert!(rep.proper);
        prop_assert!(rep.ep1, "EP1 failed");
        if rep.ep3.is_some() {
            prop_assert_eq!(rep.ep3, Some(true));
        }
        if rep.route == "staged" || rep.route.starts_with("portfolio") && rep.kind.is_some() {
            let l = &rep.ledger;
            prop_assert!(l.partitions(h.n()), "{:?}", l);
            prop_assert_eq!(l.c_main.len(), l.d);
            prop_assert!(l.c_buff.len() <= l.d_buff);
            prop_assert!((l.c_huge.len() + l.c_diff.len()) as f64 <= 8.0 / hier.beta);
        }
    }

    #[test]
    fn stability_and_sublinear_are_proper(h in mixed_hypergraph(8, 120)) {
        let hier = Hierarchy::default();
        if let Ok((col, rep)) = stability_color(&h, &hier) {
            prop_assert!(verify_coloring(&h, &col).is_ok());
            prop_assert_eq!(rep.colors, col.num_colors_used());
        }
        if let Ok((col, rep)) = sublinear_color(&h, 0.5, 0.5) {
            prop_assert!(verify_coloring(&h, &col).is_ok());
            prop_assert_eq!(rep.colors, col.num_colors_used());
        }
    }
}
