"""Engagement, confusion-matrix, click-position and significance analysis."""
from .clicks import (PUBLISHED_CLICKS, PUBLISHED_MEANS, ClickPositionReport,
                     click_position_analysis, clicks_by_position)
from .engagement import EngagementReport, ExposureLedger, attributed_games, engagement_metrics
from .performance import (ConfusionMatrix, PerformanceReport, confusion_for_child, f1_score,
                          performance_metrics)
from .report import EvaluationConfig, SplitWindows, evaluate, render_text
from .stats import (ProtocolError, StatResult, StatTestReport, levene_test, lilliefors_test,
                    significance_protocol, student_t, welch_t, wilcoxon_rank_sum)
