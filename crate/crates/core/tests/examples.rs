//! Runs every example so they stay in step with the library.

macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));

            #[test]
            fn runs() {
                main().unwrap();
            }
        }
    };
}

example!(ingest);
example!(reliability_metrics);
example!(stability_drift);
example!(quadrant_matrix);
example!(phi_association);
example!(simulate_recover);
example!(item_hypotheses);
