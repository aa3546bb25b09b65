THREADS = 0
MIN_VIEWS = 2
QUALITY_FRACTION = 0.6
GRID_STEPS = 5
MAX_ORACLE_CAMERAS = 8

GA_POPULATION_SIZE = 100
GA_MAX_GENERATIONS = 300
GA_CROSSOVER_RATE = 0.9
GA_MUTATION_RATE = 0.1
GA_MUTATION_SCALE = 0.1
GA_MUTATION_DECAY = 1e-3
GA_ELITE_COUNT = 4
GA_PENALTY_FACTOR = 1e4
