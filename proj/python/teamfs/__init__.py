# Copyright 2026 The teamfs Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Few-shot classification with episode-adaptive Mahalanobis metrics."""

from ._core import (
    TeamError,
    adapt_metric,
    classify,
    closed_form_metric,
    load_embeddings,
    run_trials,
    save_embeddings,
    sparsity_report,
    synth,
)

__all__ = [
    "TeamError",
    "adapt_metric",
    "classify",
    "closed_form_metric",
    "load_embeddings",
    "run_trials",
    "save_embeddings",
    "sparsity_report",
    "synth",
]
