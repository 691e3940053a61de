"""
Воспроизводимые потоки случайных чисел.

Контракт: генератор numpy PCG64 (64-битный), инициализируется только через
SeedSequence(seed, spawn_key=...). Глобального состояния нет: каждая
стохастическая операция получает свой поток или явный seed.

Ключи spawn_key однозначно задают подпоток, поэтому результат не зависит от
числа рабочих потоков и порядка выполнения.
"""

import numpy as np

# Метки подпотоков
STREAM_TRIAL = 1
STREAM_MC_BLOCK = 2
STREAM_DRAWS = 3


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Генератор PCG64 для (seed, *keys)."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(seq))


def block_sizes(total: int, block: int) -> list[int]:
    """
    Разбиение total розыгрышей на блоки фиксированного размера.

    Разбиение зависит только от total и block, а не от числа рабочих.
    """
    if total < 1:
        raise ValueError(f"total must be positive, got {total}")
    full, rest = divmod(total, block)
    sizes = [block] * full
    if rest:
        sizes.append(rest)
    return sizes
