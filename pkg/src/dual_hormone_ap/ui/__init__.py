"""UI feature - Rich console output, progress and logging."""

from dual_hormone_ap.ui.progress import (
    REPORT_COLUMNS,
    console,
    create_batch_progress,
    print_error,
    print_info,
    print_success,
    print_warning,
    setup_logging,
    summary_table,
)

__all__ = [
    "REPORT_COLUMNS",
    "console",
    "create_batch_progress",
    "print_error",
    "print_info",
    "print_success",
    "print_warning",
    "setup_logging",
    "summary_table",
]
