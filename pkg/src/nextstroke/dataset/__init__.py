from .schedule import DecompositionSchedule, MINI_SCHEDULE, NAMED_SCHEDULES  # noqa: F401
from .decompose import assign_subjects, decompose_image  # noqa: F401
from .reorder import (  # noqa: F401
    PrecedenceGraph,
    ReorderWeights,
    build_precedence,
    pair_cost_matrix,
    permutation_cost,
    reorder_cost,
    reorder_sequence,
)
from .build import (  # noqa: F401
    DatasetRecord,
    StrokeDataset,
    build_dataset,
    manifest_checksum,
    read_record,
    render_checksum_for,
    split_ids,
    write_record,
)
