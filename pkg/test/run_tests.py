#!/usr/bin/env python3
"""
Test Runner Script for the tevhom toolkit

Runs the pytest suites phase by phase and writes a consolidated report
next to this file.

Usage: python run_tests.py [--quick] [--report-only]
"""

import subprocess
import sys
import os
import json
import time
import argparse
import logging
from datetime import datetime

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

TEST_DIR = os.path.dirname(os.path.abspath(__file__))
RESULTS_FILE = os.path.join(TEST_DIR, 'test_results.json')
REPORT_FILE = os.path.join(TEST_DIR, 'test_report.txt')

PHASES = [
    ('🧱 PHASE 1: FOUNDATIONS', ['test_errors.py', 'test_config.py', 'test_database.py']),
    ('🔢 PHASE 2: NUMERICS', ['test_specfun.py', 'test_linalg.py', 'test_mesh.py', 'test_coeffs.py']),
    ('🌀 PHASE 3: SOLVERS', ['test_homogenize.py', 'test_te_solver.py', 'test_scatter.py', 'test_recon.py']),
    ('📋 PHASE 4: TABLES AND CLI', ['test_tables.py', 'test_cli.py']),
]


class TestRunner:
    def __init__(self, quick_mode=False):
        self.quick_mode = quick_mode
        self.test_results = {}
        self.start_time = None
        self.reports_generated = []

    def check_dependencies(self):
        """Check that the numeric stack imports"""
        missing = []
        for module in ('numpy', 'scipy', 'pandas', 'click', 'pytest'):
            try:
                __import__(module)
            except ImportError:
                missing.append(module)
        if missing:
            logger.error(f"❌ Missing packages: {', '.join(missing)}")
            logger.error("Please install them with: pip install -r requirements.txt")
            return False
        logger.info("✅ numpy, scipy, pandas, click and pytest are available")
        return True

    def run_suite(self, files):
        """Run one group of test files through pytest"""
        cmd = [sys.executable, '-m', 'pytest', '-q', '-rf', *files]
        if self.quick_mode:
            cmd += ['-m', 'not slow']

        started = time.time()
        try:
            result = subprocess.run(cmd, cwd=TEST_DIR, capture_output=True, text=True, timeout=3600,
                                    encoding='utf-8', errors='replace')
        except subprocess.TimeoutExpired:
            logger.error(f"❌ {' '.join(files)} timed out")
            return {'files': files, 'success': False, 'error': 'timeout', 'duration': time.time() - started}

        lines = [line for line in result.stdout.splitlines() if line.strip()]
        summary = lines[-1] if lines else ''
        outcome = {
            'files': files,
            'success': result.returncode == 0,
            'returncode': result.returncode,
            'summary': summary,
            'duration': time.time() - started,
        }
        if result.returncode == 0:
            logger.info(f"✅ {summary}")
        else:
            logger.error(f"❌ {summary or result.stderr.strip()}")
            outcome['output'] = result.stdout[-4000:]
        return outcome

    def run_all_tests(self):
        """Run every phase and write the reports"""
        self.start_time = time.time()
        mode = "QUICK" if self.quick_mode else "FULL"
        logger.info(f"🚀 Starting tevhom test suite ({mode} mode)")

        try:
            if not self.check_dependencies():
                return False

            success = True
            for title, files in PHASES:
                logger.info("\n" + "=" * 50)
                logger.info(title)
                logger.info("=" * 50)
                outcome = self.run_suite(files)
                self.test_results[title] = outcome
                if not outcome['success']:
                    logger.warning("⚠️  Phase failed, continuing with the remaining phases...")
                    success = False

            logger.info("\n" + "=" * 50)
            logger.info("📋 GENERATING REPORTS")
            logger.info("=" * 50)
            self.save_results()
            self.generate_consolidated_report()

            total_time = time.time() - self.start_time
            logger.info(f"\n🏁 Test suite completed in {total_time:.1f} seconds")

            if self.reports_generated:
                logger.info("📄 Generated reports:")
                for report in self.reports_generated:
                    logger.info(f"   📋 {report}")

            return success

        except Exception as e:
            logger.error(f"❌ Test suite execution error: {e}")
            return False

    def save_results(self):
        payload = {
            'timestamp': datetime.now().isoformat(),
            'quick_mode': self.quick_mode,
            'phases': self.test_results,
        }
        with open(RESULTS_FILE, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2)
        self.reports_generated.append(RESULTS_FILE)

    def generate_consolidated_report(self):
        """Write a plain-text report from the latest results"""
        results = self.test_results
        generated = datetime.now().isoformat()
        quick = self.quick_mode
        if not results:
            if not os.path.exists(RESULTS_FILE):
                logger.error("❌ No test results found, run the suite first")
                return
            with open(RESULTS_FILE, encoding='utf-8') as f:
                stored = json.load(f)
            results = stored['phases']
            generated = stored['timestamp']
            quick = stored.get('quick_mode', False)

        lines = [
            "TEVHOM TEST REPORT",
            "=" * 50,
            f"Generated: {generated}",
            f"Mode: {'quick (slow tests skipped)' if quick else 'full'}",
            "",
        ]
        for title, outcome in results.items():
            status = "✅ PASS" if outcome['success'] else "❌ FAIL"
            lines.append(f"{status}  {title}")
            lines.append(f"    files: {', '.join(outcome['files'])}")
            lines.append(f"    {outcome.get('summary') or outcome.get('error', '')}")
            lines.append(f"    duration: {outcome['duration']:.1f}s")
            lines.append("")

        passed = sum(1 for outcome in results.values() if outcome['success'])
        lines.append(f"Phases passed: {passed}/{len(results)}")

        with open(REPORT_FILE, 'w', encoding='utf-8') as f:
            f.write("\n".join(lines) + "\n")
        self.reports_generated.append(REPORT_FILE)
        logger.info(f"✅ Report written to {REPORT_FILE}")


def main():
    parser = argparse.ArgumentParser(description='Run the tevhom test suites')
    parser.add_argument('--quick', action='store_true',
                        help='Skip tests marked slow (long FEM and sampling sweeps)')
    parser.add_argument('--report-only', action='store_true',
                        help='Only regenerate the text report from the last results file')

    args = parser.parse_args()

    runner = TestRunner(quick_mode=args.quick)

    if args.report_only:
        logger.info("📋 Generating report from existing test results...")
        runner.generate_consolidated_report()
    else:
        success = runner.run_all_tests()

        if success:
            logger.info("🎉 All tests completed successfully")
            sys.exit(0)
        else:
            logger.error("⚠️  Some tests failed - check logs for details")
            sys.exit(1)


if __name__ == "__main__":
    main()
