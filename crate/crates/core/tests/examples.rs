//! Builds and runs every example so they stay in sync with the library.

mod render_views {
    include!("../examples/render_views.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod oracle_round_trip {
    include!("../examples/oracle_round_trip.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod region_grow_prompt {
    include!("../examples/region_grow_prompt.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod external_masks {
    include!("../examples/external_masks.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod postprocess {
    include!("../examples/postprocess.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod evaluate {
    include!("../examples/evaluate.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod toy_report {
    include!("../examples/toy_report.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod visibility {
    include!("../examples/visibility.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod auto_complete {
    include!("../examples/auto_complete.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod lift_points {
    include!("../examples/lift_points.rs");

    #[test]
    fn runs() {
        main();
    }
}
