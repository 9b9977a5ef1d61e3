//! Message encodings pinned to byte vectors in `tests/data/wire_vectors.txt`.

use std::collections::BTreeMap;

use otb_morph::protocol::{EnrollResponse, Nonce, Pseudonym, Refusal, RefusalReason, SymKey, TemporaryId, M1, M2, M3, M4};
use proptest::prelude::*;

fn vectors() -> BTreeMap<String, Vec<u8>> {
    include_str!("data/wire_vectors.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (name, hex_str) = l.split_once(' ').expect("name and hex");
            (name.to_string(), hex::decode(hex_str.trim()).expect("valid hex"))
        })
        .collect()
}

fn pseudonym() -> Pseudonym {
    Pseudonym {
        tid: TemporaryId([1; 16]),
        enc_rf: b"\x20rf".to_vec(),
        pid_ttp: "ttp".into(),
        lifetime: 1_000_000,
        sig: vec![0x55; 4],
    }
}

#[test]
fn encodings_match_pinned_vectors() {
    let v = vectors();
    let m1 = M1 {
        id_c: "alice".into(),
        n_c: Nonce([0xAA; 16]),
        pn: pseudonym(),
        tid_prev: TemporaryId([2; 16]),
    };
    let m2 = M2 {
        id_s: "srv".into(),
        n_s: Nonce([0xBB; 16]),
        resp_s: vec![1, 2, 3],
    };
    let m3 = M3 { resp_c: vec![9; 5] };
    let m4 = M4 { resp_s: vec![] };
    let er = EnrollResponse {
        id_s: "srv".into(),
        n_s: Nonce([0xCC; 16]),
        sk: SymKey([0xDD; 32]),
    };
    let refusal = Refusal {
        reason: RefusalReason::KeyMismatch,
    };

    assert_eq!(pseudonym().encode(), v["pseudonym"]);
    assert_eq!(m1.encode(), v["m1"]);
    assert_eq!(m2.encode(), v["m2"]);
    assert_eq!(m3.encode(), v["m3"]);
    assert_eq!(m4.encode(), v["m4"]);
    assert_eq!(er.encode(), v["enroll_response"]);
    assert_eq!(refusal.encode(), v["refusal"]);

    assert_eq!(Pseudonym::decode(&v["pseudonym"]).unwrap(), pseudonym());
    assert_eq!(M1::decode(&v["m1"]).unwrap(), m1);
    assert_eq!(M2::decode(&v["m2"]).unwrap(), m2);
    assert_eq!(M3::decode(&v["m3"]).unwrap(), m3);
    assert_eq!(M4::decode(&v["m4"]).unwrap(), m4);
    assert_eq!(EnrollResponse::decode(&v["enroll_response"]).unwrap(), er);
}

#[test]
fn every_refusal_reason_looks_the_same_on_the_wire() {
    let reasons = [
        RefusalReason::Expired,
        RefusalReason::BadSignature,
        RefusalReason::UnknownTid,
        RefusalReason::ReusedTid,
        RefusalReason::Busy,
        RefusalReason::DecryptFailed,
        RefusalReason::Malformed,
        RefusalReason::KeyMismatch,
    ];
    for reason in reasons {
        let bytes = Refusal { reason }.encode();
        assert_eq!(bytes, vectors()["refusal"]);
        assert!(Refusal::is_refusal(&bytes));
    }
}

#[test]
fn wrong_tag_and_trailing_bytes_are_rejected() {
    let v = vectors();
    assert!(M2::decode(&v["m1"]).is_err());
    let mut long = v["m3"].clone();
    long.push(0);
    assert!(M3::decode(&long).is_err());
    assert!(M4::decode(&[]).is_err());
}

proptest! {
    #[test]
    fn truncated_messages_never_decode(cut in 0usize..200) {
        let v = vectors();
        let m1 = &v["m1"];
        let cut = cut % m1.len();
        prop_assert!(M1::decode(&m1[..cut]).is_err());
    }

    #[test]
    fn m2_round_trips(id in "[a-z]{0,12}", n in any::<[u8; 16]>(), resp in prop::collection::vec(any::<u8>(), 0..64)) {
        let m = M2 { id_s: id, n_s: Nonce(n), resp_s: resp };
        prop_assert_eq!(M2::decode(&m.encode()).unwrap(), m);
    }
}
