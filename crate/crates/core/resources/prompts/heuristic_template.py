from typing import Tuple

def solve_B(<INPUT_B>):
    '''
    Args:
    <ARGS>

    Returns:
    <RETURNS>
    '''

    return <SOLUTION_B>