import numpy as np
from typing import Tuple

def convert_input_A_to_B([PARAMS]):
    ''' Convert input of Problem A into input of Problem B
    Args:
[ARGS]

    Returns:
    input_B: A tuple storing the corresponding input of Problem B.
    '''

    # Placeholder (replace with your actual implementation)
    input_B = ...

    return input_B


def convert_solution_B_to_A(solution_B):
    ''' Convert solution of Problem B into solution of Problem A
    Args:
    solution_B: The output of Problem B.

    Returns:
[RETURN]
    '''

    # Placeholder (replace with your actual implementation)
[PLACEHOLDER]