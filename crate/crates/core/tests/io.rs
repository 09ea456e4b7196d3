use flockmf::dynamics::{simulate, OutputPolicy, SimOptions};
use flockmf::io::{read_snapshot, trajectory_table, write_snapshot, Table};
use flockmf::{AgentEnsemble, InitialSampler, ModelParams};
use proptest::prelude::*;

#[test]
fn trajectory_table_reads_back() {
    let e = InitialSampler::boxed(0.0, 1.0, 1.0).sample(3, 2, 1, &[1]);
    let rec = simulate(&e, &ModelParams::new(2.5, 0.3, 2), 1.0, &OutputPolicy::Linear { samples: 4 }, &SimOptions::default().snapshots())
        .unwrap();
    let t = trajectory_table(&rec, true);
    assert_eq!(t.names.len(), 3 + 2 * 3 * 2);
    let back = Table::read_from(t.render().unwrap().as_bytes()).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.get("D").unwrap(), rec.spatial().as_slice());
    assert_eq!(back.meta_value("p"), Some("2.5"));
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(Table::read_from("# a: 1\n".as_bytes()).is_err());
    assert!(Table::read_from("x,y\n1,2\n3\n".as_bytes()).is_err());
    assert!(Table::read_from("x\n1\n# late: 1\n".as_bytes()).is_err());
    assert!(Table::new().column("a,b", vec![1.0]).render().is_err());
    assert!(read_snapshot(&b"FMF2\0\0\0\0\0\0\0\0\0\0\0\0"[..]).is_err());
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &AgentEnsemble::uniform(1, vec![0.0], vec![1.0]).unwrap()).unwrap();
    buf.pop();
    assert!(read_snapshot(buf.as_slice()).is_err());
}

proptest! {
    #[test]
    fn snapshots_roundtrip_bitwise(seed in any::<u64>(), n in 1usize..30, d in 1usize..=3) {
        let e = InitialSampler::boxed(-1.0, 2.0, 3.0).sample(n, d, seed, &[0]);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &e).unwrap();
        prop_assert_eq!(buf.len(), 16 + 8 * (2 * n * d + n));
        prop_assert_eq!(read_snapshot(buf.as_slice()).unwrap(), e);
    }

    #[test]
    fn tables_roundtrip_any_finite_value(xs in prop::collection::vec(-1e300f64..1e300, 0..40)) {
        let ys: Vec<f64> = xs.iter().map(|x| x / 7.0).collect();
        let t = Table::new().meta("k", "v w").column("x", xs).column("y", ys);
        prop_assert_eq!(Table::read_from(t.render().unwrap().as_bytes()).unwrap(), t);
    }
}
