import os
import hypothesis
import numpy as np
import pytest

from lsi.parallel import set_thread_count

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _reset_thread_count(monkeypatch):
    monkeypatch.delenv("LSI_THREADS", raising=False)
    yield
    set_thread_count(None)
