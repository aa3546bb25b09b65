"""Installation script for the 'camera-portfolio' package"""

from setuptools import setup, find_packages


def main():
    """Install camera-portfolio Python libraries"""
    setup(
        name='camera-portfolio',
        packages=find_packages(exclude=['tests', 'tests.*']),
        package_data={'camera_portfolio': ['scenarios/*.scenario']},
        setup_requires=['setuptools_scm'],
        use_scm_version={'fallback_version': '0.1.0'},
        python_requires='>=3.9',
        install_requires=[
            "click",
            "flask>=2.2",
            "numpy",
            "scipy",
        ],
        tests_require=['pytest', 'pytest-mock'],
        entry_points={
            'console_scripts': [
                'portfolio-cam = camera_portfolio.cli:main',
            ],
        },
    )


if __name__ == '__main__':
    main()
