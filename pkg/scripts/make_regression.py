"""Regenerate the frozen end-to-end report and the golden chat transcript."""

import shutil
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from e2e import CHAT_INPUT, CHAT_TRANSCRIPT, REGRESSION_REPORT, chat_transcript, run_e2e  # noqa: E402


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        report = run_e2e(Path(tmp))
        REGRESSION_REPORT.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(report / "report.json", REGRESSION_REPORT)
        text = chat_transcript(Path(tmp) / "models", CHAT_INPUT.read_text(encoding="utf-8"))
        CHAT_TRANSCRIPT.write_text(text, encoding="utf-8")
    print(f"wrote {REGRESSION_REPORT} and {CHAT_TRANSCRIPT}")


if __name__ == "__main__":
    main()
