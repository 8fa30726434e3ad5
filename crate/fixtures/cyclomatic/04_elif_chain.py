def execute_command(video, possible_answers, question):
    n = len(video.frame_from_index(0).find('cup'))
    if n == 0:
        return 'none'
    elif n == 1:
        return 'one'
    elif n == 2:
        return 'two'
    else:
        return 'many'
