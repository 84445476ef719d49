"""Acceptance criteria 1-10, one test each, plus the mutation check of the suite itself."""

import pytest

from traitevo import acceptance
from traitevo.cli import EXIT_ACCEPTANCE, EXIT_OK, main


@pytest.mark.parametrize("number", [c.number for c in acceptance.CRITERIA],
                         ids=[f"criterion_{c.number:02d}_{c.title.replace(' ', '_')}"
                              for c in acceptance.CRITERIA])
def test_criterion(number, acceptance_log):
    c = acceptance.criterion(number)
    res = c.run(acceptance.np.random.default_rng(acceptance.SEED + number))
    line = res.line()
    print(line)
    acceptance_log.append(line)
    assert res.passed, line + " " + "; ".join(res.notes)


def test_tampered_kernel_variance_fails_operator_identity(monkeypatch, capsys):
    first = acceptance.criterion(1)
    with acceptance.tampered_kernel(1.1):
        res = first.run()
        assert not res.passed
        monkeypatch.setattr(acceptance, "CRITERIA", (first,))
        assert main(["acceptance"]) == EXIT_ACCEPTANCE
    assert "[FAIL]  1" in capsys.readouterr().out
    # the patch is undone and the caches cleared
    assert first.run().passed
    assert main(["acceptance"]) == EXIT_OK
