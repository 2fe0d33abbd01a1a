import numpy as np
import pytest

from diarymc.diary import Episode, EpisodeSequence, NonNClass, Phase
from diarymc.model import FIXED_N1_RATE, ModelParams, SharingConfig


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240811))


def random_params(rng, k=3, sharing=SharingConfig()) -> ModelParams:
    """A valid random parameter set (ordered betas, Dirichlet rows)."""
    gn = sharing.n_groups_n
    gb = sharing.n_groups_nonn
    beta_n = np.empty((gn, k))
    for g in range(gn):
        free = np.sort(rng.gamma(2.0, 0.05, size=k - 1)) + FIXED_N1_RATE
        beta_n[g, 0] = FIXED_N1_RATE
        beta_n[g, 1:] = free
    beta_nonn = rng.gamma(2.0, 0.2, size=(gb, 3)) + 0.01
    return ModelParams(
        k=k,
        sharing=sharing,
        beta_n=beta_n,
        beta_nonn=beta_nonn,
        p_to_n=rng.dirichlet(np.ones(k), size=(3, 3, k)),
        p_to_nonn=rng.dirichlet(np.ones(3), size=(3, k, 3)),
        p0_n=rng.dirichlet(np.ones(k), size=3),
        p0_nonn=rng.dirichlet(np.ones(3), size=3),
        p00=rng.random(3),
    )


CANDIDATE_SETS = (
    frozenset({NonNClass.S, NonNClass.SB}),
    frozenset({NonNClass.B, NonNClass.SB}),
    frozenset({NonNClass.SB}),
    frozenset(NonNClass),
)


def random_sequence(rng, k=3, n_episodes=None, subject_id="s1", censored_end=True):
    """Random alternating sequence with values filled; returns (seq, values).

    The returned sequence leaves N states unset and censored classes
    ambiguous (inference-ready); values is a consistent complete assignment.
    """
    if n_episodes is None:
        n_episodes = int(rng.integers(1, 7))
    start_n = bool(rng.integers(0, 2))
    episodes = []
    values = np.empty(n_episodes, dtype=np.int64)
    for j in range(n_episodes):
        is_n = start_n if j % 2 == 0 else not start_n
        dur = float(rng.uniform(0.5, 60.0))
        last = j == n_episodes - 1
        censored = last and censored_end
        if is_n:
            episodes.append(Episode(phase=Phase.N, duration_days=dur, censored=censored))
            values[j] = rng.integers(0, k)
        elif censored:
            cands = CANDIDATE_SETS[rng.integers(0, len(CANDIDATE_SETS))]
            episodes.append(
                Episode(
                    phase=Phase.NON_N, duration_days=dur, censored=True, candidates=cands
                )
            )
            allowed = sorted(c.value - 1 for c in cands)
            values[j] = allowed[rng.integers(0, len(allowed))]
        else:
            cls = NonNClass(int(rng.integers(1, 4)))
            episodes.append(
                Episode(phase=Phase.NON_N, duration_days=dur, observed_class=cls)
            )
            values[j] = cls.value - 1
    seq = EpisodeSequence(
        subject_id=subject_id,
        treatment=int(rng.integers(1, 4)),
        episodes=tuple(episodes),
    )
    return seq, values
