#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use framefill_core::constraints::ConstraintSuite;
use framefill_core::decoder::{decode, DecodeRequest, InfillOptions, InfillTask};
use framefill_core::engine::{Engine, InfillRequest};
use framefill_core::scorer::{RemoteScorer, Scorer};

/// Serves `scorer` on an ephemeral port from a background runtime.
fn spawn(scorer: Arc<dyn Scorer>) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, framefill_cli::service::scorer_router(scorer))
                .await
                .unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

#[test]
fn remote_scorer_decodes_like_the_local_one() {
    let vocab = common::vocab();
    let lexicon = common::lexicon();
    let stories = common::stories(&lexicon);
    let local: Arc<dyn Scorer> = Arc::new(common::train_lm(&stories[..300], &vocab, 3));
    let remote = RemoteScorer::new(&spawn(local.clone()), vocab.len());

    let prefix = vocab.encode("Charles went shopping. [blank] Then he left. [sep] [Commerce_buy]");
    assert_eq!(
        remote.next_logprobs(&prefix).unwrap(),
        local.next_logprobs(&prefix).unwrap()
    );

    let mut request = DecodeRequest::new(
        prefix,
        ConstraintSuite::empty(),
        BTreeSet::from([vocab.sep(), vocab.eos()]),
    );
    request.beam_size = 5;
    request.max_new_tokens = 12;
    let a: Vec<_> = decode(&request, local.as_ref())
        .unwrap()
        .into_iter()
        .map(|h| h.tokens)
        .collect();
    let b: Vec<_> = decode(&request, &remote)
        .unwrap()
        .into_iter()
        .map(|h| h.tokens)
        .collect();
    assert_eq!(a, b);

    let task = InfillRequest {
        task: InfillTask {
            sentences: vec![Some("Charles went shopping.".into()), None],
            frames: vec![vec!["[Commerce_buy]".into()]],
        },
        options: InfillOptions {
            beam_size: 4,
            ..Default::default()
        },
    };
    let via_local = Engine::new(lexicon.clone(), vocab.clone(), local)
        .infill(&task)
        .unwrap();
    let via_remote = Engine::new(lexicon, vocab.clone(), Arc::new(remote))
        .infill(&task)
        .unwrap();
    assert_eq!(via_local, via_remote);
}

#[test]
fn unreachable_scorer_is_retryable() {
    let remote = RemoteScorer::new("http://127.0.0.1:9", 10).with_retries(0);
    let err = remote.next_logprobs(&[1]).unwrap_err();
    assert!(err.is_retryable(), "{err}");
}
