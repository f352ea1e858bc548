from ._defdts import (
    DefdtsError,
    boundary_f1,
    build_prompt,
    builtin_pool,
    chi_square_test,
    cohen_kappa,
    deduce_shift,
    from_boundaries,
    parse_output,
    pk_error,
    random_segmenter,
    synth_corpus,
    texttiling,
    to_boundaries,
    window_diff,
)

__all__ = [
    "DefdtsError",
    "boundary_f1",
    "build_prompt",
    "builtin_pool",
    "chi_square_test",
    "cohen_kappa",
    "deduce_shift",
    "from_boundaries",
    "parse_output",
    "pk_error",
    "random_segmenter",
    "synth_corpus",
    "texttiling",
    "to_boundaries",
    "window_diff",
]
