#!/usr/bin/env python3
"""
Run every enabled experiment from experiment_config.json
Ball-measure tails, concentration bounds, noise recovery, risk rate and inconsistency demo
"""
import os
import sys
import logging
import argparse
from typing import Any, Dict, List, Optional

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))

from Experiments.harness import ExperimentConfig, run_experiment
from utils.config_loader import get_config_loader, load_user_config
from utils.log_setup import setup_logging
from utils.seeding import resolve_seed

logger = logging.getLogger(__name__)


def run_all_experiments(kinds: Optional[List[str]] = None, seed: Optional[int] = None,
                        user_config: Optional[Dict[str, Any]] = None,
                        workers: Optional[int] = None, timings: bool = False) -> Dict[str, Dict[str, Any]]:
    """
    Run the given experiment kinds (default: every enabled one) and save their outputs

    Args:
        kinds: Experiment kinds, in run order
        seed: Master seed (None falls back to the user file, then NOISYKNN_SEED, then 0)
        user_config: Parsed --config file
        workers: Worker count override
        timings: Keep runtime columns in the written records

    Returns:
        {kind: {'success': bool, 'passed': bool, 'error': str or None}}
    """
    loader = get_config_loader()
    kinds = kinds or loader.get_enabled_experiments()
    master_seed = resolve_seed(seed if seed is not None else (user_config or {}).get('seed'))

    logger.info("=" * 80)
    logger.info(f"Running {len(kinds)} experiments with seed {master_seed}: {kinds}")
    logger.info("=" * 80)

    results = {kind: {'success': False, 'passed': False, 'error': None} for kind in kinds}

    for step, kind in enumerate(kinds, start=1):
        logger.info("\n" + "=" * 80)
        logger.info(f"STEP {step}/{len(kinds)}: {kind}")
        logger.info("=" * 80)
        try:
            resolved = loader.resolve_experiment(kind, user_config,
                                                 {'seed': master_seed, 'workers': workers, 'timings': timings})
            config = ExperimentConfig.from_dict(resolved)
            result = run_experiment(config)
            result.save(resolved.get('output_dir', 'results'), timings=timings)

            results[kind]['success'] = True
            results[kind]['passed'] = result.passed
            logger.info(f"{'✓' if result.passed else '✗'} {kind} checks {'passed' if result.passed else 'failed'}")
        except Exception as e:
            logger.error(f"✗ Error running {kind}: {str(e)}")
            results[kind]['error'] = str(e)

    logger.info("\n" + "=" * 80)
    logger.info("SUMMARY")
    logger.info("=" * 80)
    for kind, outcome in results.items():
        if outcome['error']:
            logger.info(f"{kind}: ✗ ERROR")
            logger.info(f"  Error: {outcome['error']}")
        else:
            logger.info(f"{kind}: {'✓ PASSED' if outcome['passed'] else '✗ FAILED'}")
    logger.info("=" * 80)

    return results


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description='Run all enabled experiments')
    parser.add_argument('kinds', nargs='*', help='Experiment kinds (default: every enabled one)')
    parser.add_argument('--config', help='User configuration JSON')
    parser.add_argument('--seed', type=int, help='Master seed')
    parser.add_argument('--workers', type=int, help='Parallel workers (-1 for every core)')
    parser.add_argument('--timings', action='store_true', help='Record per-replicate runtimes')
    args = parser.parse_args()

    setup_logging(get_config_loader().get_logging_config(), log_name='all_experiments.log')

    try:
        user = load_user_config(args.config) if args.config else None
        outcomes = run_all_experiments(args.kinds or None, args.seed, user, args.workers, args.timings)
        if all(o['success'] and o['passed'] for o in outcomes.values()):
            logger.info("\n✓ All experiments passed!")
            sys.exit(0)
        else:
            logger.warning("\n⚠ Some experiments failed. Check logs above for details.")
            sys.exit(1)
    except KeyboardInterrupt:
        logger.info("\n⚠ Process interrupted by user")
        sys.exit(1)
    except Exception as e:
        logger.error(f"\n✗ Unexpected error: {str(e)}")
        sys.exit(1)
