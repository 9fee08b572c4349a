"""Offline evaluation of recommenders shown in multi-carousel pages."""

from .core import (PLACEHOLDER, Carousel, CarouselPage, DatasetSplit, DiscountWeights, FeatureMatrix,
                   InteractionMatrix, build_page, cell_key, ground_truth_from_matrix)
from .experiment import (CarouselScenario, evaluate_carousel, evaluate_individual, improvement, rank_table,
                         tune_random_search)
from .metrics import (PageMetrics, average_precision_page, concat_order, dcg2d, evaluate_page_set, idcg2d,
                      ndcg2d, ndcg_page, page_metrics, precision_page, relevance_grid, resolve_mask)

__version__ = "0.1.0"
