//! Quick timing probe (not a correctness test).

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use noteswap_core::ledger::Ledger;
use noteswap_core::note::AssetAmount;
use noteswap_core::primitives::{self, SpendingKey};
use noteswap_core::proving::setup;
use noteswap_core::transactions::{
    build_joinsplit, build_mint, CaseId, JoinSplitRequest, OutputSpec, Recipient, MEMO_BYTES,
};

#[test]
#[ignore]
fn timing_probe() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let t0 = std::time::Instant::now();
    let params = setup(16, &mut rng);
    println!(
        "setup(16): {:?}, constraints = {}",
        t0.elapsed(),
        params.pk_joinsplit.circuit().num_constraints()
    );
    let mut ledger = Ledger::new(16, params);
    let key = SpendingKey::random(&mut rng);
    let addr = primitives::derive_address(&key);
    let recipient = Recipient::from_address(&addr);
    let (mint, note) = build_mint(&recipient, 3, 10, &mut rng).unwrap();
    let pos = ledger.apply_mint(&mint).unwrap();

    let t1 = std::time::Instant::now();
    let n = 20;
    let mut spend = noteswap_core::exchange::OwnedNote { note, position: pos };
    for _ in 0..n {
        let inputs = noteswap_core::exchange::inputs_with_dummy_padding(
            &ledger,
            &[spend.clone()],
            &key,
            &mut rng,
        );
        let request = JoinSplitRequest {
            rt: ledger.root(),
            block_n: ledger.block_height(),
            inputs,
            outputs: [
                OutputSpec::plain(recipient.clone(), AssetAmount::new(3, spend.note.v1)),
                OutputSpec::plain(recipient.clone(), AssetAmount::new(3, 0)),
            ],
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            memo: [0u8; MEMO_BYTES],
            intent: CaseId::DefaultPayment,
            evidence: None,
        };
        let (tx, outs) = build_joinsplit(&ledger.params().pk_joinsplit, &request, &mut rng).unwrap();
        let acc = ledger.verify_and_append(&tx).unwrap();
        spend = noteswap_core::exchange::OwnedNote {
            note: outs[0],
            position: acc.positions[0],
        };
    }
    println!("{} build+verify+append cycles: {:?}", n, t1.elapsed());
}
