"""Payloads whose encodings are pinned byte-for-byte in tests/fixtures."""

from lambdaframe.dataset import EntryRange, uniform_layout
from lambdaframe.monitor import ExecutionTrace, Phase, Sample
from lambdaframe.payload import WARMUP, Payload, WorkerResponse

DATASET = uniform_layout("golden", 1, 2, 4, 64, ("x", "y"), seed=3, kind="simulated_remote", requires_token=True)
RANGE = EntryRange(1, 4, 8, ((0, 1),))

CASES = {
    "invoke_inline": Payload(
        range=RANGE,
        script="filter x < 0.5;\ncount 1;\n",
        dataset=DATASET,
        token=b"ticket\n",
        headers=(("include/h.h", b"def sq(a) = a * a;\n"),),
        run_id="golden",
        attempt=2,
    ),
    "invoke_ref": Payload(range=RANGE, script="mean 1 y;\n", dataset_ref="manifests/golden.json", run_id="golden"),
    "warmup": Payload(range=EntryRange(0, 0, 0, ()), script="", dataset_ref="-", kind=WARMUP),
}

RESPONSES = {
    "response_success": WorkerResponse(
        "success", 1, 2, result_ref="results/golden/1-2",
        monitoring=ExecutionTrace(
            1, 2, 10.0, 12.5, cold=True, samples=[Sample(2.5, 0.5, 1024, 64)], phases=[Phase("fetch", 0.0, 1.0, 64)],
        ),
    ),
    "response_failure": WorkerResponse("failure", 3, 1, error_kind="TokenError", error_message="no token"),
}
